//! Reference-free title metric: a learned projection of frozen sentence
//! embeddings, trained so that abstracts lie closer to better titles.

mod model;
mod store;
mod train;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

pub use model::{loss, loss_terms, LossConfig, LossTerms, LossValue, ProjectionModel};
pub use store::EmbeddingStore;
pub use train::{candidate_scores, evaluate, train, EpochReport, TrainingReport};

/// Serialisation version of [`TrainedMetric`].
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub margin: f64,
    pub lambda: f64,
    pub scale: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Epochs without dev improvement before stopping; 0 disables.
    pub early_stop_patience: usize,
    /// Defaults to the embedding dimension.
    pub hidden_dim: Option<usize>,
    /// Defaults to the embedding dimension.
    pub output_dim: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let l = LossConfig::default();
        TrainConfig {
            margin: l.margin,
            lambda: l.lambda,
            scale: l.scale,
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 16,
            seed: 0,
            early_stop_patience: 5,
            hidden_dim: None,
            output_dim: None,
        }
    }
}

impl TrainConfig {
    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            margin: self.margin,
            lambda: self.lambda,
            scale: self.scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss_config().validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.hidden_dim == Some(0) || self.output_dim == Some(0) {
            return Err(Error::Config("projection dims must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedMetric {
    pub format_version: u32,
    pub model: ProjectionModel,
    pub config: TrainConfig,
    pub report: TrainingReport,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

impl TrainedMetric {
    pub fn score(&self, abstract_emb: &[f64], title_emb: &[f64]) -> Result<f64> {
        self.model.score(abstract_emb, title_emb)
    }

    pub fn score_ids(&self, store: &EmbeddingStore, abstract_id: &str, title_id: &str) -> Result<f64> {
        self.score(store.require(abstract_id)?, store.require(title_id)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric serialises")
    }

    /// Parses and checks the version before the body, so a future format fails
    /// with a version error rather than a field error.
    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        if probe.format_version != FORMAT_VERSION {
            return Err(Error::Version {
                expected: FORMAT_VERSION,
                found: probe.format_version,
            });
        }
        let m: TrainedMetric = serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
        m.model.validate()?;
        m.config.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl SplitSizes {
    pub const STANDARD: SplitSizes = SplitSizes {
        train: 170,
        dev: 25,
        test: 35,
    };

    pub fn total(&self) -> usize {
        self.train + self.dev + self.test
    }

    /// Rescale to `n` items: floors of the proportional sizes, remainder to the largest part.
    pub fn scaled_to(&self, n: usize) -> Result<SplitSizes> {
        let total = self.total();
        if total == 0 {
            return Err(Error::Infeasible("split sizes are all zero".into()));
        }
        if n == total {
            return Ok(*self);
        }
        let part = |s: usize| s * n / total;
        let mut out = SplitSizes {
            train: part(self.train),
            dev: part(self.dev),
            test: part(self.test),
        };
        let rest = n - out.total();
        let largest = [self.train, self.dev, self.test].into_iter().max().expect("three");
        if self.train == largest {
            out.train += rest;
        } else if self.test == largest {
            out.test += rest;
        } else {
            out.dev += rest;
        }
        for (name, want, got) in [
            ("train", self.train, out.train),
            ("dev", self.dev, out.dev),
            ("test", self.test, out.test),
        ] {
            if want > 0 && got == 0 {
                return Err(Error::Infeasible(format!(
                    "{n} instances are too few for a non-empty {name} part"
                )));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSplit {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

/// `n_splits` independent train/dev/test partitions of `ids`. Each split is
/// a seeded shuffle of the sorted ids, cut at the (scaled) sizes.
pub fn make_metric_splits(ids: &[String], n_splits: usize, sizes: SplitSizes, seed: u64) -> Result<Vec<MetricSplit>> {
    let mut sorted: Vec<String> = ids.to_vec();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateId(w[0].clone()));
    }
    let sizes = sizes.scaled_to(sorted.len())?;
    (0..n_splits)
        .map(|k| {
            let mut rng = seed::derived_rng(seed, &[b"metric-split", &(k as u64).to_le_bytes()]);
            let mut order = sorted.clone();
            order.shuffle(&mut rng);
            let test = order.split_off(sizes.train + sizes.dev);
            let dev = order.split_off(sizes.train);
            Ok(MetricSplit { train: order, dev, test })
        })
        .collect()
}
