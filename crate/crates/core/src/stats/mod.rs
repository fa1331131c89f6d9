//! Correlation coefficients, the WMT relative-ranking Kendall variant and
//! multi-split summaries.

mod report;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scoring::RelativeRankingJudgment;
use crate::{Error, Result};

pub use report::{format_table, MetricTable};

fn check_pair(x: &[f64], y: &[f64], what: &str) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::UndefinedCorrelation(format!("{what} needs at least 3 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("{what} input")));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Pearson's r. Zero variance in either argument is an error, never 0.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, "pearson")?;
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the average of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of tie-averaged ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, "spearman")?;
    pearson(&average_ranks(x), &average_ranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WmtTau {
    pub tau: f64,
    pub concordant: usize,
    pub discordant: usize,
}

/// Kendall-like tau over relative-ranking judgments:
/// `(concordant - discordant) / (concordant + discordant)`.
///
/// A judgment is concordant iff the metric scores the better title strictly
/// higher; metric ties count as discordant.
pub fn kendall_wmt_tau(judgments: &[RelativeRankingJudgment], metric_scores: &HashMap<String, f64>) -> Result<WmtTau> {
    if judgments.is_empty() {
        return Err(Error::Empty("kendall tau needs at least one judgment".into()));
    }
    let score = |id: &str| {
        metric_scores.get(id).copied().ok_or_else(|| Error::Unknown {
            what: "metric score for candidate",
            id: id.to_string(),
        })
    };
    let mut concordant = 0;
    let mut discordant = 0;
    for j in judgments {
        let (better, worse) = (score(&j.better_candidate_id)?, score(&j.worse_candidate_id)?);
        if better > worse {
            concordant += 1;
        } else {
            discordant += 1;
        }
    }
    Ok(WmtTau {
        tau: (concordant as f64 - discordant as f64) / (concordant + discordant) as f64,
        concordant,
        discordant,
    })
}

/// One scored title for system-level aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemScoreItem {
    pub system: String,
    pub human: f64,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemMeans {
    pub system: String,
    pub n: usize,
    pub human: f64,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemLevelReport {
    pub systems: Vec<SystemMeans>,
    /// `None` with fewer than three systems (or undefined correlation).
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

/// Unweighted per-system means of human and metric scores, and their correlation across systems.
pub fn system_level(items: &[SystemScoreItem]) -> SystemLevelReport {
    let mut acc: BTreeMap<&str, (usize, f64, f64)> = BTreeMap::new();
    for it in items {
        let e = acc.entry(&it.system).or_default();
        e.0 += 1;
        e.1 += it.human;
        e.2 += it.metric;
    }
    let systems: Vec<SystemMeans> = acc
        .into_iter()
        .map(|(s, (n, h, m))| SystemMeans {
            system: s.to_string(),
            n,
            human: h / n as f64,
            metric: m / n as f64,
        })
        .collect();
    let human: Vec<f64> = systems.iter().map(|s| s.human).collect();
    let metric: Vec<f64> = systems.iter().map(|s| s.metric).collect();
    let (pearson, spearman) = if systems.len() >= 3 {
        (pearson(&metric, &human).ok(), spearman(&metric, &human).ok())
    } else {
        (None, None)
    };
    SystemLevelReport {
        systems,
        pearson,
        spearman,
    }
}

/// Mean and sample standard deviation over per-split values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl SplitSummary {
    /// `mean±std` with the given decimals for each part.
    pub fn format(&self, mean_decimals: usize, std_decimals: usize) -> String {
        format!("{:.*}±{:.*}", mean_decimals, self.mean, std_decimals, self.std)
    }
}

impl fmt::Display for SplitSummary {
    /// Three decimals for the mean, two for the deviation (`0.707±0.17`).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format(3, 2))
    }
}

pub fn multi_split_summary(values: &[f64]) -> Result<SplitSummary> {
    if values.len() < 2 {
        return Err(Error::Empty(format!("need at least 2 split values, got {}", values.len())));
    }
    let m = mean(values);
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    Ok(SplitSummary {
        mean: m,
        std: var.sqrt(),
        n: values.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    System,
    Segment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coefficient {
    Pearson,
    Spearman,
    KendallWmt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub metric: String,
    pub level: Level,
    pub coefficient: Coefficient,
    pub value: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_split: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<SplitSummary>,
}

impl CorrelationReport {
    /// Aggregate per-split values into one report whose `value` is the mean.
    pub fn from_splits(metric: &str, level: Level, coefficient: Coefficient, per_split: Vec<f64>, n: usize) -> Result<Self> {
        let summary = multi_split_summary(&per_split)?;
        Ok(CorrelationReport {
            metric: metric.to_string(),
            level,
            coefficient,
            value: summary.mean,
            n,
            per_split,
            summary: Some(summary),
        })
    }

    pub fn display_value(&self) -> String {
        match &self.summary {
            Some(s) => s.to_string(),
            None => format!("{:.3}", self.value),
        }
    }
}

/// Machine-readable companion of the text tables.
pub fn correlation_csv(reports: &[CorrelationReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "level", "coefficient", "value", "std", "n", "splits"])?;
    for r in reports {
        w.write_record([
            r.metric.clone(),
            format!("{:?}", r.level),
            format!("{:?}", r.coefficient),
            format!("{:.6}", r.value),
            r.summary.map(|s| format!("{:.6}", s.std)).unwrap_or_default(),
            r.n.to_string(),
            r.per_split.len().to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rr(b: &str, w: &str) -> RelativeRankingJudgment {
        RelativeRankingJudgment {
            abstract_id: "a".into(),
            better_candidate_id: b.into(),
            worse_candidate_id: w.into(),
            score_diff: 1.0,
        }
    }

    #[test]
    fn affine_pearson() {
        let x = [1.0, 2.0, 5.0, 7.5, -3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decreasing_spearman() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [10.0, 3.0, 2.5, -8.0];
        assert!((spearman(&x, &y).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_is_error() {
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, 2.0, f64::NAN], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), [3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn wmt_tau_rules() {
        let j = [rr("x", "y"), rr("y", "z")];
        let agree: HashMap<String, f64> = [("x", 3.0), ("y", 2.0), ("z", 1.0)].map(|(k, v)| (k.into(), v)).into();
        assert_eq!(kendall_wmt_tau(&j, &agree).unwrap().tau, 1.0);
        let ties: HashMap<String, f64> = [("x", 1.0), ("y", 1.0), ("z", 1.0)].map(|(k, v)| (k.into(), v)).into();
        assert_eq!(kendall_wmt_tau(&j, &ties).unwrap().tau, -1.0);
        assert!(kendall_wmt_tau(&[], &agree).is_err());
        assert!(kendall_wmt_tau(&[rr("x", "q")], &agree).is_err());
    }

    #[test]
    fn split_summary() {
        let s = multi_split_summary(&[0.6, 0.8]).unwrap();
        assert!((s.mean - 0.7).abs() < 1e-12);
        assert!((s.std - 0.141_421_356_237_309_5).abs() < 1e-12);
        assert_eq!(s.to_string(), "0.700±0.14");
        let same = multi_split_summary(&[0.5; 4]).unwrap();
        assert_eq!(same.std, 0.0);
        assert!(multi_split_summary(&[1.0]).is_err());
    }

    #[test]
    fn system_level_means() {
        let items: Vec<SystemScoreItem> = [("A", 1.0, 0.5), ("A", 0.0, 0.5), ("B", 0.2, 0.1), ("C", -1.0, -2.0)]
            .iter()
            .map(|&(s, h, m)| SystemScoreItem {
                system: s.into(),
                human: h,
                metric: m,
            })
            .collect();
        let r = system_level(&items);
        assert_eq!(r.systems[0].human, 0.5);
        assert_eq!(r.systems[0].n, 2);
        assert!(r.pearson.is_some());
        let two = system_level(&items[..3]);
        assert_eq!(two.pearson, None);
    }

    #[test]
    fn five_system_hand_value() {
        // human means 1..5, metric means [2,1,4,3,5]:
        // centered x = [-2,-1,0,1,2], y = [-1,-2,1,0,2], sxy = 2+2+0+0+4 = 8, sxx = syy = 10 -> r = 0.8
        let items: Vec<SystemScoreItem> = [(1.0, 2.0), (2.0, 1.0), (3.0, 4.0), (4.0, 3.0), (5.0, 5.0)]
            .iter()
            .enumerate()
            .map(|(i, &(h, m))| SystemScoreItem {
                system: format!("s{i}"),
                human: h,
                metric: m,
            })
            .collect();
        assert!((system_level(&items).pearson.unwrap() - 0.8).abs() < 1e-12);
        let same: Vec<SystemScoreItem> = items
            .iter()
            .map(|i| SystemScoreItem {
                metric: i.human,
                ..i.clone()
            })
            .collect();
        assert!((system_level(&same).pearson.unwrap() - 1.0).abs() < 1e-12);
    }
}
