use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{macro_f1, F1Mode};
use crate::{Error, Result};

/// One system output under a binary humor constraint, with the label the
/// humor classifier assigned to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlledGeneration {
    pub abstract_id: String,
    /// Requested: funny (`true`) or not funny.
    pub constraint_funny: bool,
    pub text: String,
    pub assigned_funny: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub f1_macro: f64,
    pub acc_funny: f64,
    pub acc_not_funny: f64,
    pub ratio_same: f64,
    pub n_funny: usize,
    pub n_not_funny: usize,
    /// Abstracts with both variants, the denominator of `ratio_same`.
    pub n_pairs: usize,
    pub identical_pairs: usize,
    /// Abstracts lacking one of the two variants.
    pub missing_variant: Vec<String>,
}

impl fmt::Display for ControlReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "F1_macro      {:.3}", self.f1_macro)?;
        writeln!(f, "ACC_notFUNNY  {:.1}%", 100.0 * self.acc_not_funny)?;
        writeln!(f, "ACC_FUNNY     {:.1}%", 100.0 * self.acc_funny)?;
        writeln!(f, "Ratio_SAME    {:.1}%", 100.0 * self.ratio_same)
    }
}

fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Binary macro F1 and per-constraint accuracy of assigned vs requested labels,
/// plus the share of abstracts whose two variants are identical after
/// whitespace normalisation.
pub fn generation_control_metrics(generations: &[ControlledGeneration]) -> Result<ControlReport> {
    if generations.is_empty() {
        return Err(Error::Empty("no generations".into()));
    }
    let gold: Vec<u8> = generations.iter().map(|g| u8::from(g.constraint_funny)).collect();
    let pred: Vec<u8> = generations.iter().map(|g| u8::from(g.assigned_funny)).collect();
    let f1_macro = macro_f1(&pred, &gold, F1Mode::Binary)?;

    let acc = |funny: bool| -> (f64, usize) {
        let side: Vec<&ControlledGeneration> = generations.iter().filter(|g| g.constraint_funny == funny).collect();
        let ok = side.iter().filter(|g| g.assigned_funny == funny).count();
        let v = if side.is_empty() { 0.0 } else { ok as f64 / side.len() as f64 };
        (v, side.len())
    };
    let (acc_funny, n_funny) = acc(true);
    let (acc_not_funny, n_not_funny) = acc(false);

    let mut variants: BTreeMap<&str, [Option<String>; 2]> = BTreeMap::new();
    for g in generations {
        let slot = &mut variants.entry(&g.abstract_id).or_default()[usize::from(g.constraint_funny)];
        if slot.is_some() {
            return Err(Error::DuplicateId(format!(
                "{} ({})",
                g.abstract_id,
                if g.constraint_funny { "funny" } else { "not funny" }
            )));
        }
        *slot = Some(normalize(&g.text));
    }
    let mut missing_variant = Vec::new();
    let mut n_pairs = 0;
    let mut identical_pairs = 0;
    for (id, [a, b]) in &variants {
        match (a, b) {
            (Some(a), Some(b)) => {
                n_pairs += 1;
                identical_pairs += usize::from(a == b);
            }
            _ => missing_variant.push(id.to_string()),
        }
    }
    Ok(ControlReport {
        f1_macro,
        acc_funny,
        acc_not_funny,
        ratio_same: if n_pairs == 0 { 0.0 } else { identical_pairs as f64 / n_pairs as f64 },
        n_funny,
        n_not_funny,
        n_pairs,
        identical_pairs,
        missing_variant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(id: usize, funny: bool, text: &str, assigned: bool) -> ControlledGeneration {
        ControlledGeneration {
            abstract_id: format!("a{id}"),
            constraint_funny: funny,
            text: text.into(),
            assigned_funny: assigned,
        }
    }

    #[test]
    fn perfect_and_distinct() {
        let gens: Vec<_> = (0..5)
            .flat_map(|i| [g(i, true, "Fun title", true), g(i, false, "Plain title", false)])
            .collect();
        let r = generation_control_metrics(&gens).unwrap();
        assert_eq!((r.f1_macro, r.acc_funny, r.acc_not_funny, r.ratio_same), (1.0, 1.0, 1.0, 0.0));
    }

    #[test]
    fn three_identical_of_twenty() {
        let gens: Vec<_> = (0..20)
            .flat_map(|i| {
                let other = if i < 3 { " Same   title ".to_string() } else { format!("other {i}") };
                [g(i, true, "Same title", true), g(i, false, &other, false)]
            })
            .chain([g(99, true, "lonely", false)])
            .collect();
        let r = generation_control_metrics(&gens).unwrap();
        assert_eq!(r.ratio_same, 0.15);
        assert_eq!(r.missing_variant, ["a99"]);
        assert!(r.to_string().contains("Ratio_SAME    15.0%"));
    }
}
