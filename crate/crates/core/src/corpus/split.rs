use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{write_jsonl, LabelOrigin, PaperRecord, Source};
use crate::{seed, Error, Result};

/// Composition constraints for the held-out dev and test sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub dev_size: usize,
    pub test_size: usize,
    /// Fraction of dev/test records from the NLP source.
    pub devtest_source_ratio: f64,
    /// Fraction of dev/test records with a funny (binary) label.
    pub devtest_funny_ratio: f64,
    pub pin_human_annotated_to_train: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            dev_size: 600,
            test_size: 600,
            devtest_source_ratio: 0.8,
            devtest_funny_ratio: 1.0 / 3.0,
            pin_human_annotated_to_train: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<PaperRecord>,
    pub dev: Vec<PaperRecord>,
    pub test: Vec<PaperRecord>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub total: usize,
    pub not_funny: usize,
    pub funny: usize,
    pub nlp: usize,
    pub ml: usize,
}

impl SplitCounts {
    pub fn of(records: &[PaperRecord]) -> Self {
        let mut c = SplitCounts {
            total: records.len(),
            ..Default::default()
        };
        for r in records {
            if r.is_funny() {
                c.funny += 1;
            } else {
                c.not_funny += 1;
            }
            match r.source {
                Source::Nlp => c.nlp += 1,
                Source::Ml => c.ml += 1,
            }
        }
        c
    }
}

/// Integer quotas for a two-class partition of `n`: floor each share, then give
/// the remainder to the larger class (the first one on ties).
fn two_way_quota(n: usize, first_ratio: f64) -> (usize, usize) {
    let a = (n as f64 * first_ratio + 1e-9).floor() as usize;
    let b = (n as f64 * (1.0 - first_ratio) + 1e-9).floor() as usize;
    let rest = n.saturating_sub(a + b);
    if a >= b {
        (a + rest, b)
    } else {
        (a, b + rest)
    }
}

#[derive(Debug, Clone, Copy)]
struct Marginals {
    nlp: usize,
    ml: usize,
    funny: usize,
    not_funny: usize,
}

impl Marginals {
    fn new(n: usize, spec: &SplitSpec) -> Self {
        let (nlp, ml) = two_way_quota(n, spec.devtest_source_ratio);
        let (funny, not_funny) = two_way_quota(n, spec.devtest_funny_ratio);
        Marginals {
            nlp,
            ml,
            funny,
            not_funny,
        }
    }

    /// Proportional target for the NLP/funny cell.
    fn target(&self) -> usize {
        let n = self.nlp + self.ml;
        if n == 0 {
            return 0;
        }
        ((self.nlp * self.funny) as f64 / n as f64 + 1e-9).floor() as usize
    }

    /// Admissible values of the NLP/funny cell given the marginals.
    fn range(&self) -> (usize, usize) {
        (self.funny.saturating_sub(self.ml), self.nlp.min(self.funny))
    }

    /// Cell counts (nlp_funny, nlp_not, ml_funny, ml_not) for a given NLP/funny count.
    fn cells(&self, nlp_funny: usize) -> [usize; 4] {
        [
            nlp_funny,
            self.nlp - nlp_funny,
            self.funny - nlp_funny,
            self.ml - (self.funny - nlp_funny),
        ]
    }
}

const CELL_NAMES: [&str; 4] = ["NLP/FUNNY", "NLP/NOT-FUNNY", "ML/FUNNY", "ML/NOT-FUNNY"];

fn cell_of(r: &PaperRecord) -> usize {
    match (r.source, r.is_funny()) {
        (Source::Nlp, true) => 0,
        (Source::Nlp, false) => 1,
        (Source::Ml, true) => 2,
        (Source::Ml, false) => 3,
    }
}

fn add(a: [usize; 4], b: [usize; 4]) -> [usize; 4] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

fn fits(need: [usize; 4], have: [usize; 4]) -> bool {
    need.iter().zip(have).all(|(n, h)| *n <= h)
}

/// Split into train/dev/test so that dev and test meet exact source and humor quotas.
///
/// Human-annotated records (when pinned) and unlabeled records never leave train.
/// Output lists keep the input order; the selection depends only on the set of
/// records and the seed.
pub fn make_constrained_split(records: &[PaperRecord], spec: &SplitSpec) -> Result<DatasetSplit> {
    for (name, r) in [
        ("devtest_source_ratio", spec.devtest_source_ratio),
        ("devtest_funny_ratio", spec.devtest_funny_ratio),
    ] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Config(format!("{name} must be within [0, 1], got {r}")));
        }
    }
    if spec.dev_size + spec.test_size >= records.len() {
        return Err(Error::Infeasible(format!(
            "dev_size + test_size = {} must be smaller than the corpus size {}",
            spec.dev_size + spec.test_size,
            records.len()
        )));
    }

    let mut pools: [Vec<usize>; 4] = Default::default();
    for (i, r) in records.iter().enumerate() {
        let pinned = spec.pin_human_annotated_to_train && r.humor_label_origin == LabelOrigin::Human;
        if !pinned && r.humor_label.is_some() {
            pools[cell_of(r)].push(i);
        }
    }
    let have = [pools[0].len(), pools[1].len(), pools[2].len(), pools[3].len()];

    let dev = Marginals::new(spec.dev_size, spec);
    let test = Marginals::new(spec.test_size, spec);
    let (dev_cells, test_cells) = choose_cells(&dev, &test, have)?;

    let mut rng = seed::rng(spec.seed);
    let mut assignment = vec![0u8; records.len()]; // 0 train, 1 dev, 2 test
    for (cell, pool) in pools.iter_mut().enumerate() {
        pool.sort_by(|&a, &b| records[a].id.cmp(&records[b].id));
        pool.shuffle(&mut rng);
        let (d, t) = (dev_cells[cell], test_cells[cell]);
        for &i in &pool[..d] {
            assignment[i] = 1;
        }
        for &i in &pool[d..d + t] {
            assignment[i] = 2;
        }
    }

    let mut out = DatasetSplit {
        train: Vec::with_capacity(records.len()),
        dev: Vec::with_capacity(spec.dev_size),
        test: Vec::with_capacity(spec.test_size),
    };
    for (r, a) in records.iter().zip(assignment) {
        match a {
            1 => out.dev.push(r.clone()),
            2 => out.test.push(r.clone()),
            _ => out.train.push(r.clone()),
        }
    }
    Ok(out)
}

fn choose_cells(dev: &Marginals, test: &Marginals, have: [usize; 4]) -> Result<([usize; 4], [usize; 4])> {
    let (dlo, dhi) = dev.range();
    let (tlo, thi) = test.range();
    let (dt, tt) = (dev.target().clamp(dlo, dhi), test.target().clamp(tlo, thi));

    // search outward from the proportional targets for a jointly feasible assignment
    let mut best: Option<(usize, usize, usize)> = None;
    for d in dlo..=dhi {
        for t in tlo..=thi {
            if fits(add(dev.cells(d), test.cells(t)), have) {
                let cost = d.abs_diff(dt) + t.abs_diff(tt);
                if best.is_none_or(|(c, _, _)| cost < c) {
                    best = Some((cost, d, t));
                }
            }
        }
    }
    if let Some((_, d, t)) = best {
        return Ok((dev.cells(d), test.cells(t)));
    }

    let need = add(dev.cells(dt), test.cells(tt));
    let mut short = Vec::new();
    for c in 0..4 {
        if need[c] > have[c] {
            short.push(format!(
                "{} needs {} records for dev+test but only {} are eligible (short by {})",
                CELL_NAMES[c],
                need[c],
                have[c],
                need[c] - have[c]
            ));
        }
    }
    let totals = [
        ("NLP", dev.nlp + test.nlp, have[0] + have[1]),
        ("ML", dev.ml + test.ml, have[2] + have[3]),
        ("FUNNY", dev.funny + test.funny, have[0] + have[2]),
        ("NOT-FUNNY", dev.not_funny + test.not_funny, have[1] + have[3]),
    ];
    for (name, n, h) in totals {
        if n > h {
            short.push(format!("{name} quota needs {n}, only {h} eligible (short by {})", n - h));
        }
    }
    Err(Error::Infeasible(short.join("; ")))
}

#[derive(Serialize)]
struct SplitManifest<'a> {
    seed: u64,
    spec: &'a SplitSpec,
    train: SplitCounts,
    dev: SplitCounts,
    test: SplitCounts,
}

/// Write `train.jsonl`, `dev.jsonl`, `test.jsonl` and `split_manifest.json` into `dir`.
pub fn write_split(dir: &Path, split: &DatasetSplit, spec: &SplitSpec) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, recs) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
        let mut w = BufWriter::new(File::create(dir.join(format!("{name}.jsonl")))?);
        write_jsonl(&mut w, recs)?;
        w.flush()?;
    }
    let manifest = SplitManifest {
        seed: spec.seed,
        spec,
        train: SplitCounts::of(&split.train),
        dev: SplitCounts::of(&split.dev),
        test: SplitCounts::of(&split.test),
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(std::io::Error::from)?;
    text.push('\n');
    fs::write(dir.join("split_manifest.json"), text)?;
    Ok(())
}
