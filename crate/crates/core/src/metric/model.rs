use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

/// `y = W2 tanh(W1 x + b1) + b2`, parameters stored flat as `[W1, b1, W2, b2]`
/// with row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub params: Vec<f64>,
}

/// Activations kept for the backward pass.
pub(crate) struct Forward {
    hidden: Vec<f64>,
    pub(crate) output: Vec<f64>,
}

impl ProjectionModel {
    pub fn param_count(input: usize, hidden: usize, output: usize) -> usize {
        hidden * input + hidden + output * hidden + output
    }

    /// Near-identity weights (a rectangular identity plus a tenth of a Glorot
    /// draw) and zero biases, so the untrained metric stays close to the raw
    /// embedding distance.
    pub fn init(input_dim: usize, hidden_dim: usize, output_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 || output_dim == 0 {
            return Err(Error::Config("projection dims must be positive".into()));
        }
        let mut rng = seed::derived_rng(seed, &[b"projection-init"]);
        let mut params = Vec::with_capacity(Self::param_count(input_dim, hidden_dim, output_dim));
        let mut layer = |rows: usize, cols: usize, params: &mut Vec<f64>| {
            let a = 0.1 * (6.0 / (rows + cols) as f64).sqrt();
            for r in 0..rows {
                for c in 0..cols {
                    params.push(f64::from(u8::from(r == c)) + rng.random_range(-a..a));
                }
            }
            params.extend(std::iter::repeat_n(0.0, rows));
        };
        layer(hidden_dim, input_dim, &mut params);
        layer(output_dim, hidden_dim, &mut params);
        Ok(ProjectionModel {
            input_dim,
            hidden_dim,
            output_dim,
            params,
        })
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden_dim * self.input_dim;
        let w2 = b1 + self.hidden_dim;
        let b2 = w2 + self.output_dim * self.hidden_dim;
        (b1, w2, b2)
    }

    /// Structural check used after deserialisation.
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config("projection dims must be positive".into()));
        }
        let want = Self::param_count(self.input_dim, self.hidden_dim, self.output_dim);
        if self.params.len() != want {
            return Err(Error::DimensionMismatch {
                expected: want,
                got: self.params.len(),
            });
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Forward {
        let (ob1, ow2, ob2) = self.offsets();
        let p = &self.params;
        let hidden: Vec<f64> = (0..self.hidden_dim)
            .map(|h| {
                let row = &p[h * self.input_dim..(h + 1) * self.input_dim];
                let u: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + p[ob1 + h];
                u.tanh()
            })
            .collect();
        let output = (0..self.output_dim)
            .map(|o| {
                let row = &p[ow2 + o * self.hidden_dim..ow2 + (o + 1) * self.hidden_dim];
                row.iter().zip(&hidden).map(|(w, z)| w * z).sum::<f64>() + p[ob2 + o]
            })
            .collect();
        Forward { hidden, output }
    }

    /// Accumulate `d(upstream . y)/d(params)` into `grad`.
    pub(crate) fn backward(&self, x: &[f64], fwd: &Forward, upstream: &[f64], grad: &mut [f64]) {
        let (ob1, ow2, ob2) = self.offsets();
        let p = &self.params;
        let mut g_hidden = vec![0.0; self.hidden_dim];
        for (o, &g) in upstream.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let base = ow2 + o * self.hidden_dim;
            for h in 0..self.hidden_dim {
                grad[base + h] += g * fwd.hidden[h];
                g_hidden[h] += g * p[base + h];
            }
            grad[ob2 + o] += g;
        }
        for h in 0..self.hidden_dim {
            let gu = g_hidden[h] * (1.0 - fwd.hidden[h] * fwd.hidden[h]);
            if gu == 0.0 {
                continue;
            }
            let base = h * self.input_dim;
            for (i, &v) in x.iter().enumerate() {
                grad[base + i] += gu * v;
            }
            grad[ob1 + h] += gu;
        }
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let y = self.forward(x).output;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("projection output".into()));
        }
        Ok(y)
    }

    /// Euclidean distance in projected space.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        Ok(euclidean(&self.project(a)?, &self.project(b)?))
    }

    /// Negated projected distance; higher is better, 0 is the maximum.
    pub fn score(&self, abstract_emb: &[f64], title_emb: &[f64]) -> Result<f64> {
        Ok(-self.distance(abstract_emb, title_emb)?)
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Hyper-parameters of the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Triplet margin `m`.
    pub margin: f64,
    /// Weight of the squared term.
    pub lambda: f64,
    /// Maps BWS differences to distance units.
    pub scale: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            margin: 0.5,
            lambda: 1.0,
            scale: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!("margin must be positive, got {}", self.margin)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Config(format!("scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub triplet: f64,
    pub mse: f64,
    /// `dL/dd+` and `dL/dd-`.
    pub d_plus_grad: f64,
    pub d_minus_grad: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.triplet + self.mse
    }
}

/// `max(0, d+ - d- + m) + lambda ((d- - d+) - s delta)^2` and its partials in the distances.
pub fn loss_terms(d_plus: f64, d_minus: f64, delta_bws: f64, cfg: &LossConfig) -> LossTerms {
    let hinge = d_plus - d_minus + cfg.margin;
    let active = if hinge > 0.0 { 1.0 } else { 0.0 };
    let r = (d_minus - d_plus) - cfg.scale * delta_bws;
    LossTerms {
        triplet: hinge.max(0.0),
        mse: cfg.lambda * r * r,
        d_plus_grad: active - 2.0 * cfg.lambda * r,
        d_minus_grad: -active + 2.0 * cfg.lambda * r,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    pub triplet: f64,
    pub mse: f64,
    pub d_plus: f64,
    pub d_minus: f64,
    /// Same layout as `ProjectionModel::params`.
    pub grad: Vec<f64>,
}

/// Loss of one triplet with its analytic gradient. At zero distance the
/// distance gradient is taken as zero.
pub fn loss(
    model: &ProjectionModel,
    a: &[f64],
    t_plus: &[f64],
    t_minus: &[f64],
    delta_bws: f64,
    cfg: &LossConfig,
) -> Result<LossValue> {
    let mut grad = vec![0.0; model.params.len()];
    let (terms, dp, dm) = loss_accumulate(model, a, t_plus, t_minus, delta_bws, cfg, 1.0, &mut grad)?;
    Ok(LossValue {
        loss: terms.total(),
        triplet: terms.triplet,
        mse: terms.mse,
        d_plus: dp,
        d_minus: dm,
        grad,
    })
}

/// As [`loss`], adding `weight * gradient` into `grad`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn loss_accumulate(
    model: &ProjectionModel,
    a: &[f64],
    t_plus: &[f64],
    t_minus: &[f64],
    delta_bws: f64,
    cfg: &LossConfig,
    weight: f64,
    grad: &mut [f64],
) -> Result<(LossTerms, f64, f64)> {
    for x in [a, t_plus, t_minus] {
        model.check_input(x)?;
    }
    if !(delta_bws > 0.0 && delta_bws.is_finite()) {
        return Err(Error::invalid(
            "nonpositive_delta",
            format!("score difference must be positive, got {delta_bws}"),
        ));
    }
    let fa = model.forward(a);
    let fp = model.forward(t_plus);
    let fm = model.forward(t_minus);
    let d_plus = euclidean(&fa.output, &fp.output);
    let d_minus = euclidean(&fa.output, &fm.output);
    let terms = loss_terms(d_plus, d_minus, delta_bws, cfg);
    if !(terms.total().is_finite() && d_plus.is_finite() && d_minus.is_finite()) {
        return Err(Error::NonFinite("loss".into()));
    }
    // dd/dp(a) = (p(a) - p(t)) / d ; dd/dp(t) = -(p(a) - p(t)) / d
    let unit = |from: &[f64], to: &[f64], d: f64, coef: f64| -> Vec<f64> {
        if d == 0.0 || coef == 0.0 {
            return vec![0.0; from.len()];
        }
        from.iter().zip(to).map(|(x, y)| coef * (x - y) / d).collect()
    };
    let gp = unit(&fa.output, &fp.output, d_plus, weight * terms.d_plus_grad);
    let gm = unit(&fa.output, &fm.output, d_minus, weight * terms.d_minus_grad);
    let ga: Vec<f64> = gp.iter().zip(&gm).map(|(x, y)| x + y).collect();
    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<f64>>();
    model.backward(a, &fa, &ga, grad);
    model.backward(t_plus, &fp, &neg(&gp), grad);
    model.backward(t_minus, &fm, &neg(&gm), grad);
    Ok((terms, d_plus, d_minus))
}
