use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{loss_accumulate, ProjectionModel};
use super::{EmbeddingStore, TrainConfig, TrainedMetric, FORMAT_VERSION};
use crate::scoring::RelativeRankingJudgment;
use crate::stats::{kendall_wmt_tau, WmtTau};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    /// 0 is the initialised model before any update.
    pub epoch: usize,
    /// Mean loss over the training judgments after the epoch.
    pub train_loss: f64,
    /// Training judgments with `d+ >= d-`.
    pub order_violations: usize,
    /// Training judgments with `d+ + m > d-`.
    pub margin_violations: usize,
    pub dev_tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs: Vec<EpochReport>,
    pub best_epoch: usize,
    pub best_dev_tau: Option<f64>,
    pub stopped_early: bool,
    /// Epoch in which a non-finite value appeared; the returned model is the
    /// last good checkpoint.
    pub diverged_at: Option<usize>,
}

fn check_embeddings(judgments: &[RelativeRankingJudgment], store: &EmbeddingStore) -> Result<()> {
    for j in judgments {
        for id in [&j.abstract_id, &j.better_candidate_id, &j.worse_candidate_id] {
            store.require(id)?;
        }
    }
    Ok(())
}

/// Metric scores for every candidate mentioned in `judgments`.
pub fn candidate_scores(
    model: &ProjectionModel,
    judgments: &[RelativeRankingJudgment],
    store: &EmbeddingStore,
) -> Result<HashMap<String, f64>> {
    let mut projected: HashMap<&str, Vec<f64>> = HashMap::new();
    for j in judgments {
        for id in [&j.abstract_id, &j.better_candidate_id, &j.worse_candidate_id] {
            if !projected.contains_key(id.as_str()) {
                projected.insert(id, model.project(store.require(id)?)?);
            }
        }
    }
    let mut out = HashMap::new();
    for j in judgments {
        let a = &projected[j.abstract_id.as_str()];
        for c in [&j.better_candidate_id, &j.worse_candidate_id] {
            if !out.contains_key(c) {
                out.insert(c.clone(), -super::model::euclidean(a, &projected[c.as_str()]));
            }
        }
    }
    Ok(out)
}

/// Segment-level WMT tau of a model on a judgment set.
pub fn evaluate(model: &ProjectionModel, judgments: &[RelativeRankingJudgment], store: &EmbeddingStore) -> Result<WmtTau> {
    let scores = candidate_scores(model, judgments, store)?;
    kendall_wmt_tau(judgments, &scores)
}

struct Pass {
    mean_loss: f64,
    order_violations: usize,
    margin_violations: usize,
}

fn full_pass(
    model: &ProjectionModel,
    judgments: &[RelativeRankingJudgment],
    store: &EmbeddingStore,
    cfg: &TrainConfig,
) -> Result<Pass> {
    let lc = cfg.loss_config();
    let mut scratch = vec![0.0; model.params.len()];
    let mut total = 0.0;
    let mut order = 0;
    let mut margin = 0;
    for j in judgments {
        let (terms, dp, dm) = loss_accumulate(
            model,
            store.require(&j.abstract_id)?,
            store.require(&j.better_candidate_id)?,
            store.require(&j.worse_candidate_id)?,
            j.score_diff,
            &lc,
            0.0,
            &mut scratch,
        )?;
        total += terms.total();
        order += usize::from(dp >= dm);
        margin += usize::from(dp + lc.margin > dm);
    }
    Ok(Pass {
        mean_loss: if judgments.is_empty() { 0.0 } else { total / judgments.len() as f64 },
        order_violations: order,
        margin_violations: margin,
    })
}

/// Plain minibatch SGD over `train`, keeping the checkpoint with the best dev
/// tau (ties keep the earlier one). With an empty dev set the last epoch is kept.
pub fn train(
    train: &[RelativeRankingJudgment],
    dev: &[RelativeRankingJudgment],
    store: &EmbeddingStore,
    cfg: &TrainConfig,
) -> Result<TrainedMetric> {
    cfg.validate()?;
    check_embeddings(train, store)?;
    check_embeddings(dev, store)?;
    let hidden = cfg.hidden_dim.unwrap_or(store.dim());
    let output = cfg.output_dim.unwrap_or(store.dim());
    let mut model = ProjectionModel::init(store.dim(), hidden, output, cfg.seed)?;
    let lc = cfg.loss_config();

    let dev_tau = |m: &ProjectionModel| -> Result<Option<f64>> {
        if dev.is_empty() {
            Ok(None)
        } else {
            Ok(Some(evaluate(m, dev, store)?.tau))
        }
    };
    let epoch_report = |m: &ProjectionModel, epoch: usize| -> Result<EpochReport> {
        let pass = full_pass(m, train, store, cfg)?;
        Ok(EpochReport {
            epoch,
            train_loss: pass.mean_loss,
            order_violations: pass.order_violations,
            margin_violations: pass.margin_violations,
            dev_tau: dev_tau(m)?,
        })
    };

    let first = epoch_report(&model, 0)?;
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_tau = first.dev_tau;
    let mut report = TrainingReport {
        epochs: vec![first],
        best_epoch: 0,
        best_dev_tau: best_tau,
        stopped_early: false,
        diverged_at: None,
    };
    let mut rng = seed::derived_rng(cfg.seed, &[b"epoch-order"]);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut since_best = 0;
    let mut grad = vec![0.0; model.params.len()];

    'epochs: for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let w = 1.0 / batch.len() as f64;
            for &k in batch {
                let j = &train[k];
                let step = loss_accumulate(
                    &model,
                    store.require(&j.abstract_id)?,
                    store.require(&j.better_candidate_id)?,
                    store.require(&j.worse_candidate_id)?,
                    j.score_diff,
                    &lc,
                    w,
                    &mut grad,
                );
                match step {
                    Err(Error::NonFinite(_)) => {
                        report.diverged_at = Some(epoch);
                        break 'epochs;
                    }
                    other => {
                        other?;
                    }
                }
            }
            for (p, g) in model.params.iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
            if model.params.iter().any(|p| !p.is_finite()) {
                report.diverged_at = Some(epoch);
                break 'epochs;
            }
        }
        let rep = match epoch_report(&model, epoch) {
            Err(Error::NonFinite(_)) => {
                report.diverged_at = Some(epoch);
                break;
            }
            other => other?,
        };
        if !rep.train_loss.is_finite() {
            report.diverged_at = Some(epoch);
            break;
        }
        let tau = rep.dev_tau;
        report.epochs.push(rep);
        let improved = match (tau, best_tau) {
            (Some(t), Some(b)) => t > b,
            (None, _) => true,
            (Some(_), None) => true,
        };
        if improved {
            best = model.clone();
            best_epoch = epoch;
            best_tau = tau;
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    if report.diverged_at.is_some() {
        log::warn!("training diverged at epoch {:?}; keeping epoch {best_epoch}", report.diverged_at);
    }
    report.best_epoch = best_epoch;
    report.best_dev_tau = best_tau;
    Ok(TrainedMetric {
        format_version: FORMAT_VERSION,
        model: best,
        config: cfg.clone(),
        report,
    })
}
