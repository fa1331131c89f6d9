//! Humor ensembles: per-classifier label matrices, EnsMV / EnsSUM aggregation,
//! threshold search, macro F1, balanced training splits and generation-control metrics.

mod baseline;
mod control;

use std::collections::{BTreeMap, HashMap};
use std::io::Read;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::HumorLabel;
use crate::{seed, Error, Result};

pub use baseline::{BaselineClassifier, BaselineConfig};
pub use control::{generation_control_metrics, ControlReport, ControlledGeneration};

/// Final label of a doubly annotated title: the larger of the two.
pub fn merge_annotations(a: HumorLabel, b: HumorLabel) -> HumorLabel {
    a.max(b)
}

/// `K` classifiers by `N` titles, values in {0, 1, 2}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    classifier_ids: Vec<String>,
    title_ids: Vec<String>,
    /// Row per classifier.
    labels: Vec<Vec<u8>>,
}

impl LabelMatrix {
    pub fn new(classifier_ids: Vec<String>, title_ids: Vec<String>, labels: Vec<Vec<u8>>) -> Result<Self> {
        if labels.len() != classifier_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: classifier_ids.len(),
                got: labels.len(),
            });
        }
        for row in &labels {
            if row.len() != title_ids.len() {
                return Err(Error::DimensionMismatch {
                    expected: title_ids.len(),
                    got: row.len(),
                });
            }
            if let Some(v) = row.iter().find(|&&v| v > 2) {
                return Err(Error::Config(format!("label {v} outside {{0,1,2}}")));
            }
        }
        for ids in [&classifier_ids, &title_ids] {
            let mut seen = std::collections::BTreeSet::new();
            if let Some(d) = ids.iter().find(|id| !seen.insert(id.as_str())) {
                return Err(Error::DuplicateId(d.clone()));
            }
        }
        Ok(LabelMatrix {
            classifier_ids,
            title_ids,
            labels,
        })
    }

    pub fn classifiers(&self) -> usize {
        self.classifier_ids.len()
    }

    pub fn titles(&self) -> usize {
        self.title_ids.len()
    }

    pub fn classifier_ids(&self) -> &[String] {
        &self.classifier_ids
    }

    pub fn title_ids(&self) -> &[String] {
        &self.title_ids
    }

    pub fn label(&self, classifier: usize, title: usize) -> u8 {
        self.labels[classifier][title]
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.labels
    }

    /// Sum of label values per title.
    pub fn sums(&self) -> Vec<u32> {
        (0..self.titles())
            .map(|t| self.labels.iter().map(|row| u32::from(row[t])).sum())
            .collect()
    }

    /// CSV: header `classifier,<title ids..>`, one row per classifier.
    pub fn parse_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.is_empty() {
            return Err(Error::parse(1, "empty header"));
        }
        let title_ids: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
        let mut classifier_ids = Vec::new();
        let mut labels = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != header.len() {
                return Err(Error::parse(line, format!("expected {} fields, got {}", header.len(), rec.len())));
            }
            classifier_ids.push(rec[0].trim().to_string());
            let row = rec
                .iter()
                .skip(1)
                .map(|v| match v.trim() {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    "2" => Ok(2),
                    other => Err(Error::parse(line, format!("label {other:?} outside {{0,1,2}}"))),
                })
                .collect::<Result<Vec<u8>>>()?;
            labels.push(row);
        }
        LabelMatrix::new(classifier_ids, title_ids, labels)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["classifier".to_string()];
        header.extend(self.title_ids.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.classifier_ids.iter().zip(&self.labels) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(u8::to_string));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("utf-8"))
    }
}

/// Two-column gold CSV `title_id,label`.
pub fn parse_gold_csv<R: Read>(reader: R) -> Result<BTreeMap<String, u8>> {
    #[derive(Deserialize)]
    struct Row {
        title_id: String,
        label: u8,
    }
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = BTreeMap::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let r = row?;
        if r.label > 2 {
            return Err(Error::parse(i + 2, format!("label {} outside {{0,1,2}}", r.label)));
        }
        if out.insert(r.title_id.clone(), r.label).is_some() {
            return Err(Error::DuplicateId(r.title_id));
        }
    }
    Ok(out)
}

/// Gold labels in matrix title order; every title must have one.
pub fn align_gold(matrix: &LabelMatrix, gold: &BTreeMap<String, u8>) -> Result<Vec<u8>> {
    matrix
        .title_ids()
        .iter()
        .map(|t| {
            gold.get(t).copied().ok_or_else(|| Error::Unknown {
                what: "gold label for title",
                id: t.clone(),
            })
        })
        .collect()
}

/// Majority vote: 0 when at least `ceil((K+1)/2)` classifiers say 0, otherwise
/// 2 if strictly more 2s than 1s, else 1.
pub fn ens_mv(matrix: &LabelMatrix) -> Vec<u8> {
    let k = matrix.classifiers();
    if k % 2 == 0 {
        log::warn!("majority vote over an even number of classifiers ({k})");
    }
    let need = (k + 2) / 2;
    (0..matrix.titles())
        .map(|t| {
            let mut counts = [0usize; 3];
            for row in matrix.rows() {
                counts[row[t] as usize] += 1;
            }
            if counts[0] >= need {
                0
            } else if counts[2] > counts[1] {
                2
            } else {
                1
            }
        })
        .collect()
}

fn check_thresholds(k: usize, i: u32, j: u32) -> Result<()> {
    if i >= j || j as usize > 2 * k {
        return Err(Error::Config(format!("thresholds need 0 <= i < j <= {}, got ({i}, {j})", 2 * k)));
    }
    Ok(())
}

fn sum_label(sum: u32, i: u32, j: u32) -> u8 {
    if sum < i {
        0
    } else if sum < j {
        1
    } else {
        2
    }
}

/// Thresholded label sum: 0 below `i`, 1 in `[i, j)`, 2 from `j`.
pub fn ens_sum(matrix: &LabelMatrix, i: u32, j: u32) -> Result<Vec<u8>> {
    check_thresholds(matrix.classifiers(), i, j)?;
    Ok(matrix.sums().into_iter().map(|s| sum_label(s, i, j)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum EnsembleMode {
    Mv,
    Sum { i: u32, j: u32 },
}

impl EnsembleMode {
    pub fn apply(&self, matrix: &LabelMatrix) -> Result<Vec<u8>> {
        match *self {
            EnsembleMode::Mv => Ok(ens_mv(matrix)),
            EnsembleMode::Sum { i, j } => ens_sum(matrix, i, j),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Mode {
    ThreeWay,
    /// Medium funny and funny merged into one class.
    Binary,
}

impl std::str::FromStr for F1Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "three-way" | "three_way" | "3" => Ok(F1Mode::ThreeWay),
            "binary" | "2" => Ok(F1Mode::Binary),
            other => Err(format!("unknown F1 mode {other:?}")),
        }
    }
}

impl F1Mode {
    pub fn classes(self) -> usize {
        match self {
            F1Mode::ThreeWay => 3,
            F1Mode::Binary => 2,
        }
    }

    fn map(self, label: u8) -> usize {
        match self {
            F1Mode::ThreeWay => label as usize,
            F1Mode::Binary => usize::from(label > 0),
        }
    }
}

/// `matrix[gold][pred]`.
pub fn confusion(pred: &[u8], gold: &[u8], mode: F1Mode) -> Result<Vec<Vec<usize>>> {
    if pred.len() != gold.len() {
        return Err(Error::DimensionMismatch {
            expected: gold.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("macro F1 needs at least one item".into()));
    }
    if let Some(v) = pred.iter().chain(gold).find(|&&v| v > 2) {
        return Err(Error::Config(format!("label {v} outside {{0,1,2}}")));
    }
    let c = mode.classes();
    let mut m = vec![vec![0usize; c]; c];
    for (&p, &g) in pred.iter().zip(gold) {
        m[mode.map(g)][mode.map(p)] += 1;
    }
    Ok(m)
}

/// Unweighted mean of per-class F1 from a confusion matrix. A class absent
/// from both prediction and gold counts with F1 = 0.
pub fn macro_f1_from_confusion(m: &[Vec<usize>]) -> f64 {
    let c = m.len();
    let total: f64 = (0..c)
        .map(|k| {
            let tp = m[k][k];
            let fp: usize = (0..c).filter(|&g| g != k).map(|g| m[g][k]).sum();
            let fn_: usize = (0..c).filter(|&p| p != k).map(|p| m[k][p]).sum();
            let denom = 2 * tp + fp + fn_;
            if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            }
        })
        .sum();
    total / c as f64
}

pub fn macro_f1(pred: &[u8], gold: &[u8], mode: F1Mode) -> Result<f64> {
    Ok(macro_f1_from_confusion(&confusion(pred, gold, mode)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearch {
    pub i: u32,
    pub j: u32,
    pub score: f64,
    /// Gold has a single class, so the objective cannot separate thresholds well.
    pub degenerate: bool,
}

/// Exhaustive search over `0 <= i < j <= 2K` maximising macro F1. Ties go to
/// the smaller `i`, then the smaller `j`.
pub fn search_thresholds(matrix: &LabelMatrix, gold: &[u8], mode: F1Mode) -> Result<ThresholdSearch> {
    if gold.len() != matrix.titles() {
        return Err(Error::DimensionMismatch {
            expected: matrix.titles(),
            got: gold.len(),
        });
    }
    let sums = matrix.sums();
    let max = 2 * matrix.classifiers() as u32;
    let mut best: Option<ThresholdSearch> = None;
    let mut pred = vec![0u8; sums.len()];
    for i in 0..max {
        for j in i + 1..=max {
            for (p, &s) in pred.iter_mut().zip(&sums) {
                *p = sum_label(s, i, j);
            }
            let score = macro_f1(&pred, gold, mode)?;
            if best.is_none_or(|b| score > b.score) {
                best = Some(ThresholdSearch {
                    i,
                    j,
                    score,
                    degenerate: false,
                });
            }
        }
    }
    let mut best = best.ok_or_else(|| Error::Empty("no classifiers, no threshold grid".into()))?;
    let first = gold.first().map(|&g| mode.map(g));
    if gold.iter().all(|&g| Some(mode.map(g)) == first) {
        log::warn!("gold labels contain a single class; threshold optimum is degenerate");
        best.degenerate = true;
    }
    Ok(best)
}

/// Which titles form the dev set of a balanced split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DevRule {
    /// All funny titles not drawn for training plus as many unused not-funny titles.
    RemainingFunnyBalanced,
    Fixed { funny: usize, not_funny: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalancedSplitSpec {
    pub n_splits: usize,
    /// Titles labeled funny or medium funny.
    pub train_funny_or_medium: usize,
    pub train_not_funny: usize,
    pub dev: DevRule,
    pub seed: u64,
}

impl BalancedSplitSpec {
    pub fn stage1(seed: u64) -> Self {
        BalancedSplitSpec {
            n_splits: 11,
            train_funny_or_medium: 100,
            train_not_funny: 200,
            dev: DevRule::RemainingFunnyBalanced,
            seed,
        }
    }

    pub fn stage2(seed: u64) -> Self {
        BalancedSplitSpec {
            train_funny_or_medium: 400,
            train_not_funny: 800,
            ..Self::stage1(seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalancedSplit {
    pub train: Vec<String>,
    pub dev: Vec<String>,
}

/// Draw `n_splits` train/dev splits from one seeded stream. Pools are sorted
/// by id first so the result does not depend on input order.
pub fn make_balanced_splits(pool: &[(String, HumorLabel)], spec: &BalancedSplitSpec) -> Result<Vec<BalancedSplit>> {
    let mut seen = HashMap::new();
    for (id, _) in pool {
        if seen.insert(id.as_str(), ()).is_some() {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    let mut funny: Vec<&str> = pool.iter().filter(|(_, l)| l.is_funny()).map(|(id, _)| id.as_str()).collect();
    let mut not_funny: Vec<&str> = pool.iter().filter(|(_, l)| !l.is_funny()).map(|(id, _)| id.as_str()).collect();
    funny.sort_unstable();
    not_funny.sort_unstable();

    let (dev_funny, dev_not) = match spec.dev {
        DevRule::RemainingFunnyBalanced => {
            let rest = funny.len().saturating_sub(spec.train_funny_or_medium);
            (rest, rest)
        }
        DevRule::Fixed { funny, not_funny } => (funny, not_funny),
    };
    let need_f = spec.train_funny_or_medium + dev_funny;
    let need_n = spec.train_not_funny + dev_not;
    if need_f > funny.len() || need_n > not_funny.len() {
        return Err(Error::Infeasible(format!(
            "balanced splits need {need_f} funny/medium and {need_n} not-funny titles, pool has {} and {}",
            funny.len(),
            not_funny.len()
        )));
    }

    let mut rng = seed::derived_rng(spec.seed, &[b"balanced-splits"]);
    (0..spec.n_splits)
        .map(|_| {
            let mut f = funny.clone();
            let mut n = not_funny.clone();
            f.shuffle(&mut rng);
            n.shuffle(&mut rng);
            let train = f[..spec.train_funny_or_medium]
                .iter()
                .chain(&n[..spec.train_not_funny])
                .map(|s| s.to_string())
                .collect();
            let dev = f[spec.train_funny_or_medium..need_f]
                .iter()
                .chain(&n[spec.train_not_funny..need_n])
                .map(|s| s.to_string())
                .collect();
            Ok(BalancedSplit { train, dev })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(cols: &[&[u8]]) -> LabelMatrix {
        let k = cols[0].len();
        let rows: Vec<Vec<u8>> = (0..k).map(|c| cols.iter().map(|col| col[c]).collect()).collect();
        LabelMatrix::new(
            (0..k).map(|c| format!("clf{c}")).collect(),
            (0..cols.len()).map(|t| format!("t{t}")).collect(),
            rows,
        )
        .unwrap()
    }

    #[test]
    fn merge_is_max() {
        use HumorLabel::*;
        assert_eq!(merge_annotations(NotFunny, MediumFunny), MediumFunny);
        assert_eq!(merge_annotations(Funny, Funny), Funny);
        assert_eq!(merge_annotations(NotFunny, NotFunny), NotFunny);
    }

    #[test]
    fn majority_vote_rules() {
        let m = matrix(&[
            &[0; 11],
            &[0, 0, 0, 0, 0, 0, 1, 1, 1, 2, 2],
            &[0, 0, 0, 0, 0, 1, 1, 1, 2, 2, 2],
            &[0, 0, 0, 0, 0, 1, 1, 2, 2, 2, 2],
        ]);
        assert_eq!(ens_mv(&m), [0, 0, 1, 2]);
    }

    #[test]
    fn sum_boundaries() {
        // sums 0, 16, 10, 7, 6, 15
        let col = |s: usize| -> Vec<u8> {
            let mut v = vec![0u8; 11];
            for k in 0..s {
                v[k % 11] += 1;
            }
            v
        };
        let cols: Vec<Vec<u8>> = [0, 16, 10, 7, 6, 15].iter().map(|&s| col(s)).collect();
        let refs: Vec<&[u8]> = cols.iter().map(Vec::as_slice).collect();
        let m = matrix(&refs);
        assert_eq!(m.sums(), [0, 16, 10, 7, 6, 15]);
        assert_eq!(ens_sum(&m, 7, 16).unwrap(), [0, 2, 1, 1, 0, 1]);
        assert!(ens_sum(&m, 7, 7).is_err());
        assert!(ens_sum(&m, 7, 23).is_err());
        let gold = [0, 2, 1, 1, 0, 1];
        let r = search_thresholds(&m, &gold, F1Mode::ThreeWay).unwrap();
        assert_eq!((r.i, r.j, r.score), (7, 16, 1.0));
    }

    #[test]
    fn f1_by_hand() {
        // gold/pred: (0,0) x3, (0,1), (1,1), (1,2), (2,2) x2
        let gold = [0, 0, 0, 0, 1, 1, 2, 2];
        let pred = [0, 0, 0, 1, 1, 2, 2, 2];
        // class 0: tp3 fp0 fn1 -> 6/7; class 1: tp1 fp1 fn1 -> 2/4; class 2: tp2 fp1 fn0 -> 4/5
        let want = (6.0 / 7.0 + 0.5 + 0.8) / 3.0;
        assert!((macro_f1(&pred, &gold, F1Mode::ThreeWay).unwrap() - want).abs() < 1e-15);
        // binary: not funny tp3 fp0 fn1 -> 6/7; funny tp4 fp1 fn0 -> 8/9
        let want_bin = (6.0 / 7.0 + 8.0 / 9.0) / 2.0;
        assert!((macro_f1(&pred, &gold, F1Mode::Binary).unwrap() - want_bin).abs() < 1e-15);
        // absent class counts as zero
        assert!((macro_f1(&[0, 1], &[0, 1], F1Mode::ThreeWay).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(macro_f1(&[], &[], F1Mode::Binary).is_err());
    }

    #[test]
    fn degenerate_gold_is_flagged() {
        let m = matrix(&[&[0, 1, 2], &[2, 2, 2]]);
        assert!(search_thresholds(&m, &[0, 0], F1Mode::ThreeWay).unwrap().degenerate);
    }

    #[test]
    fn csv_round_trip() {
        let m = matrix(&[&[0, 1, 2], &[2, 2, 0]]);
        assert_eq!(LabelMatrix::parse_csv(m.to_csv().unwrap().as_bytes()).unwrap(), m);
        assert!(LabelMatrix::parse_csv("classifier,t0\nc,3\n".as_bytes()).is_err());
        assert!(LabelMatrix::parse_csv("classifier,t0,t0\nc,1,1\n".as_bytes()).is_err());
        let gold = parse_gold_csv("title_id,label\nt0,1\nt1,0\n".as_bytes()).unwrap();
        assert!(align_gold(&m, &gold).is_ok());
        assert!(parse_gold_csv("title_id,label\nt0,1\nt0,0\n".as_bytes()).is_err());
    }

    fn pool(funny: usize, not: usize) -> Vec<(String, HumorLabel)> {
        (0..funny)
            .map(|i| (format!("f{i}"), if i % 5 == 0 { HumorLabel::Funny } else { HumorLabel::MediumFunny }))
            .chain((0..not).map(|i| (format!("n{i}"), HumorLabel::NotFunny)))
            .collect()
    }

    #[test]
    fn stage1_splits() {
        let p = pool(127, 1603);
        let label: HashMap<&str, HumorLabel> = p.iter().map(|(id, l)| (id.as_str(), *l)).collect();
        let splits = make_balanced_splits(&p, &BalancedSplitSpec::stage1(4)).unwrap();
        assert_eq!(splits.len(), 11);
        for s in &splits {
            let f = s.train.iter().filter(|id| label[id.as_str()].is_funny()).count();
            assert_eq!((f, s.train.len() - f), (100, 200));
            let df = s.dev.iter().filter(|id| label[id.as_str()].is_funny()).count();
            assert_eq!((df, s.dev.len() - df), (27, 27));
            assert!(s.dev.iter().all(|d| !s.train.contains(d)));
        }
        assert_ne!(splits[0], splits[1]);
        let mut rev = p.clone();
        rev.reverse();
        assert_eq!(make_balanced_splits(&rev, &BalancedSplitSpec::stage1(4)).unwrap(), splits);
        assert!(make_balanced_splits(&pool(99, 1603), &BalancedSplitSpec::stage1(4))
            .unwrap_err()
            .is_infeasible());
    }
}
