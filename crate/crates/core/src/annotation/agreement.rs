use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{BwsSelection, RankAnnotation};
use crate::{stats, Error, Result};

/// Agreement of two best-worst selections on the same instance:
/// `(|best_a ∩ best_b| + |worst_a ∩ worst_b|) / 4`.
pub fn selection_agreement(a: &BwsSelection, b: &BwsSelection) -> f64 {
    let best = a.best.intersection(&b.best).count();
    let worst = a.worst.intersection(&b.worst).count();
    (best + worst) as f64 / 4.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairAgreement {
    pub annotator_a: String,
    pub annotator_b: String,
    pub shared_instances: usize,
    pub agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    /// Only pairs with at least one co-annotated instance.
    pub pairs: Vec<PairAgreement>,
    /// Mean over `pairs`; `None` when no pair shares an instance.
    pub mean: Option<f64>,
}

fn by_instance<T>(
    items: &[T],
    instance: impl Fn(&T) -> &str,
    annotator: impl Fn(&T) -> &str,
) -> BTreeMap<&str, BTreeMap<&str, &T>> {
    let mut map: BTreeMap<&str, BTreeMap<&str, &T>> = BTreeMap::new();
    for item in items {
        // later items win, matching log replay
        map.entry(instance(item)).or_default().insert(annotator(item), item);
    }
    map
}

/// Average percentage agreement over annotator pairs. Pair scores are means
/// over the pair's co-annotated instances.
pub fn percentage_agreement(selections: &[BwsSelection]) -> AgreementReport {
    let grouped = by_instance(selections, |s| &s.instance_id, |s| &s.annotator_id);
    let mut per_pair: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for annotators in grouped.values() {
        let list: Vec<_> = annotators.iter().collect();
        for (i, (a, sa)) in list.iter().enumerate() {
            for (b, sb) in &list[i + 1..] {
                per_pair.entry((a, b)).or_default().push(selection_agreement(sa, sb));
            }
        }
    }
    let pairs: Vec<PairAgreement> = per_pair
        .into_iter()
        .map(|((a, b), scores)| PairAgreement {
            annotator_a: a.to_string(),
            annotator_b: b.to_string(),
            shared_instances: scores.len(),
            agreement: scores.iter().sum::<f64>() / scores.len() as f64,
        })
        .collect();
    let mean = (!pairs.is_empty()).then(|| pairs.iter().map(|p| p.agreement).sum::<f64>() / pairs.len() as f64);
    AgreementReport { pairs, mean }
}

/// Cohen's kappa for two aligned labelings over `categories`.
///
/// When chance agreement is 1 (both annotators constant on the same label) the
/// value is defined as 1.0.
pub fn cohen_kappa<T: Ord + std::fmt::Debug>(labels_a: &[T], labels_b: &[T], categories: &[T]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::DimensionMismatch {
            expected: labels_a.len(),
            got: labels_b.len(),
        });
    }
    if labels_a.is_empty() {
        return Err(Error::Empty("kappa needs at least one labeled item".into()));
    }
    let index: BTreeMap<&T, usize> = categories.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let lookup = |l: &T| {
        index.get(l).copied().ok_or_else(|| Error::Unknown {
            what: "category",
            id: format!("{l:?}"),
        })
    };
    let k = categories.len();
    let mut margin_a = vec![0usize; k];
    let mut margin_b = vec![0usize; k];
    let mut agree = 0usize;
    for (a, b) in labels_a.iter().zip(labels_b) {
        let (ia, ib) = (lookup(a)?, lookup(b)?);
        margin_a[ia] += 1;
        margin_b[ib] += 1;
        if ia == ib {
            agree += 1;
        }
    }
    let n = labels_a.len() as f64;
    let p_o = agree as f64 / n;
    let p_e: f64 = margin_a
        .iter()
        .zip(&margin_b)
        .map(|(&x, &y)| (x as f64 / n) * (y as f64 / n))
        .sum();
    if (1.0 - p_e).abs() < 1e-12 {
        if agree == labels_a.len() {
            return Ok(1.0);
        }
        return Err(Error::UndefinedCorrelation("kappa: chance agreement is 1".into()));
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRankCorrelation {
    pub annotator_a: String,
    pub annotator_b: String,
    pub instances: usize,
    pub mean_spearman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedInstance {
    pub annotator_a: String,
    pub annotator_b: String,
    pub instance_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankAgreementReport {
    pub criterion: String,
    pub pairs: Vec<PairRankCorrelation>,
    /// Instances where one of the two rank vectors is constant.
    pub skipped: Vec<SkippedInstance>,
    pub mean: Option<f64>,
}

/// Mean pairwise Spearman correlation between annotators' rankings for one criterion.
pub fn pairwise_rank_correlation(rankings: &[RankAnnotation], criterion: &str) -> RankAgreementReport {
    let selected: Vec<RankAnnotation> = rankings.iter().filter(|r| r.criterion == criterion).cloned().collect();
    let grouped = by_instance(&selected, |r| &r.instance_id, |r| &r.annotator_id);
    let mut per_pair: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for (instance, annotators) in &grouped {
        let list: Vec<_> = annotators.iter().collect();
        for (i, (a, ra)) in list.iter().enumerate() {
            for (b, rb) in &list[i + 1..] {
                let ids: BTreeSet<&String> = ra.rank_of.keys().filter(|k| rb.rank_of.contains_key(*k)).collect();
                let xa: Vec<f64> = ids.iter().map(|k| f64::from(ra.rank_of[*k])).collect();
                let xb: Vec<f64> = ids.iter().map(|k| f64::from(rb.rank_of[*k])).collect();
                match stats::spearman(&xa, &xb) {
                    Ok(rho) => per_pair.entry((a, b)).or_default().push(rho),
                    Err(_) => skipped.push(SkippedInstance {
                        annotator_a: a.to_string(),
                        annotator_b: b.to_string(),
                        instance_id: instance.to_string(),
                    }),
                }
            }
        }
    }
    let pairs: Vec<PairRankCorrelation> = per_pair
        .into_iter()
        .map(|((a, b), v)| PairRankCorrelation {
            annotator_a: a.to_string(),
            annotator_b: b.to_string(),
            instances: v.len(),
            mean_spearman: v.iter().sum::<f64>() / v.len() as f64,
        })
        .collect();
    let mean =
        (!pairs.is_empty()).then(|| pairs.iter().map(|p| p.mean_spearman).sum::<f64>() / pairs.len() as f64);
    RankAgreementReport {
        criterion: criterion.to_string(),
        pairs,
        skipped,
        mean,
    }
}
