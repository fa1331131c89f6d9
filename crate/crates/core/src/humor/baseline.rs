use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub l2: f64,
    pub learning_rate: f64,
    pub iterations: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            l2: 1e-3,
            learning_rate: 0.5,
            iterations: 300,
        }
    }
}

/// Three-class softmax regression over title embeddings, fitted with
/// full-batch gradient descent from zero weights (hence deterministic).
/// Only meant to make the ensemble pipeline runnable without external models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineClassifier {
    dim: usize,
    /// Row per class: `dim` weights followed by the bias.
    weights: Vec<Vec<f64>>,
}

const CLASSES: usize = 3;

impl BaselineClassifier {
    pub fn fit(x: &[Vec<f64>], y: &[u8], cfg: &BaselineConfig) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        let Some(dim) = x.first().map(Vec::len) else {
            return Err(Error::Empty("no training examples".into()));
        };
        if let Some(bad) = x.iter().find(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        if let Some(&l) = y.iter().find(|&&l| l as usize >= CLASSES) {
            return Err(Error::Config(format!("label {l} outside {{0,1,2}}")));
        }
        let mut model = BaselineClassifier {
            dim,
            weights: vec![vec![0.0; dim + 1]; CLASSES],
        };
        let n = x.len() as f64;
        for _ in 0..cfg.iterations {
            let mut grad = vec![vec![0.0; dim + 1]; CLASSES];
            for (xi, &yi) in x.iter().zip(y) {
                let p = model.probabilities_unchecked(xi);
                for c in 0..CLASSES {
                    let g = p[c] - f64::from(u8::from(c == yi as usize));
                    for (gw, v) in grad[c].iter_mut().zip(xi) {
                        *gw += g * v;
                    }
                    grad[c][dim] += g;
                }
            }
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                for k in 0..=dim {
                    let reg = if k < dim { cfg.l2 * w[k] } else { 0.0 };
                    w[k] -= cfg.learning_rate * (g[k] / n + reg);
                }
            }
        }
        if model.weights.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("baseline weights".into()));
        }
        Ok(model)
    }

    fn probabilities_unchecked(&self, x: &[f64]) -> [f64; CLASSES] {
        let mut z = [0.0; CLASSES];
        for (c, w) in self.weights.iter().enumerate() {
            z[c] = w[..self.dim].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[self.dim];
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e = z.map(|v| (v - m).exp());
        let s: f64 = e.iter().sum();
        e.map(|v| v / s)
    }

    pub fn probabilities(&self, x: &[f64]) -> Result<[f64; CLASSES]> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.probabilities_unchecked(x))
    }

    /// Most probable class; ties go to the lower label.
    pub fn predict(&self, x: &[f64]) -> Result<u8> {
        let p = self.probabilities(x)?;
        let mut best = 0;
        for c in 1..CLASSES {
            if p[c] > p[best] {
                best = c;
            }
        }
        Ok(best as u8)
    }
}
