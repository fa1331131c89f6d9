//! Synthetic campaigns with a planted notion of title quality.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use a2t_core::annotation::{
    create_campaign, AssignmentPolicy, BwsSelection, Campaign, CampaignKind, CampaignOptions, Candidate, TaskInstance,
};
use a2t_core::metric::{candidate_scores, evaluate, make_metric_splits, train, EmbeddingStore, SplitSizes, TrainConfig};
use a2t_core::scoring::{bws_scores, to_relative_ranking, RelativeRankingJudgment};
use a2t_core::stats::pearson;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const SYSTEMS: [&str; 6] = ["HUMAN", "BART_xsum", "BART_base", "T5_small", "PEGASUS", "GPT2"];
/// Mean distance of each system's titles from their abstract, in [`SYSTEMS`] order.
pub const RADII: [f64; 6] = [0.3, 0.5, 0.7, 0.9, 1.1, 1.3];

#[derive(Debug, Clone)]
pub struct PlantedSpec {
    pub abstracts: usize,
    pub dim: usize,
    /// Leading coordinates that carry quality; the rest are nuisance.
    pub relevant_dims: usize,
    /// Standard deviation of the title-specific nuisance offset.
    pub nuisance: f64,
    pub annotators: usize,
    /// Standard deviation of each annotator's perception noise.
    pub perception_noise: f64,
    /// Ignore quality and pick best/worst uniformly at random.
    pub random_labels: bool,
    /// Multiplies abstract coordinates and title radii.
    pub scale: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            abstracts: 300,
            dim: 16,
            relevant_dims: 16,
            nuisance: 0.0,
            annotators: 3,
            perception_noise: 0.05,
            random_labels: false,
            scale: 0.25,
            seed: 0,
        }
    }
}

pub struct Planted {
    pub campaign: Campaign,
    pub selections: Vec<BwsSelection>,
    pub store: EmbeddingStore,
    /// Candidate id -> true quality (negative planted distance).
    pub quality: HashMap<String, f64>,
    pub abstract_ids: Vec<String>,
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn planted(spec: &PlantedSpec) -> Planted {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut store = EmbeddingStore::new(spec.dim).unwrap();
    let mut quality = HashMap::new();
    let mut instances = Vec::new();
    let mut abstract_ids = Vec::new();
    for i in 0..spec.abstracts {
        let abs_id = format!("a{i}");
        let a: Vec<f64> = gaussian(&mut rng, spec.dim).into_iter().map(|x| x * spec.scale).collect();
        let mut candidates = Vec::new();
        for (k, sys) in SYSTEMS.iter().enumerate() {
            let radius = spec.scale * RADII[k] * rng.random_range(0.7..1.3);
            let mut u = gaussian(&mut rng, spec.relevant_dims);
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            u.iter_mut().for_each(|x| *x *= radius / norm);
            let mut t = a.clone();
            for (d, x) in t.iter_mut().enumerate() {
                if d < spec.relevant_dims {
                    *x += u[d];
                } else {
                    *x += spec.nuisance * normal(&mut rng);
                }
            }
            let id = format!("{abs_id}-{sys}");
            store.insert(id.clone(), t).unwrap();
            quality.insert(id.clone(), -radius);
            candidates.push(Candidate {
                id,
                title: format!("title by {sys} for {abs_id}"),
                system: sys.to_string(),
            });
        }
        store.insert(abs_id.clone(), a).unwrap();
        instances.push(TaskInstance {
            id: format!("i{i}"),
            abstract_id: abs_id.clone(),
            abstract_text: format!("abstract {i}"),
            candidates,
        });
        abstract_ids.push(abs_id);
    }
    let annotators: Vec<String> = (0..spec.annotators).map(|k| format!("ann{k}")).collect();
    let campaign = create_campaign(
        "planted",
        CampaignKind::BestWorst,
        instances,
        Some(&AssignmentPolicy::All(annotators.clone())),
        CampaignOptions {
            min_annotators_per_instance: 1,
            max_annotators_per_instance: spec.annotators.max(1),
            seed: spec.seed,
        },
    )
    .unwrap();
    let mut selections = Vec::new();
    for inst in &campaign.instances {
        for ann in &annotators {
            let mut perceived: Vec<(f64, &str)> = inst
                .candidates
                .iter()
                .map(|c| {
                    let q = if spec.random_labels {
                        rng.random::<f64>()
                    } else {
                        quality[&c.id] + spec.scale * spec.perception_noise * normal(&mut rng)
                    };
                    (q, c.id.as_str())
                })
                .collect();
            perceived.sort_by(|x, y| y.0.total_cmp(&x.0));
            let ids = |r: &[(f64, &str)]| r.iter().map(|p| p.1.to_string()).collect::<BTreeSet<_>>();
            selections.push(BwsSelection {
                instance_id: inst.id.clone(),
                annotator_id: ann.clone(),
                best: ids(&perceived[..2]),
                worst: ids(&perceived[4..]),
                timestamp_ms: 0,
            });
        }
    }
    Planted {
        campaign,
        selections,
        store,
        quality,
        abstract_ids,
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn subset(rr: &[RelativeRankingJudgment], ids: &[String]) -> Vec<RelativeRankingJudgment> {
    let keep: HashSet<&str> = ids.iter().map(String::as_str).collect();
    rr.iter().filter(|j| keep.contains(j.abstract_id.as_str())).cloned().collect()
}

/// Margin and MSE scale matched to the planted distances (roughly 0.05 to 0.4).
pub fn scaled_config(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        margin: 0.05,
        scale: 0.1,
        learning_rate: 0.1,
        ..Default::default()
    }
}

pub struct Run {
    pub test_tau: f64,
    pub init_test_tau: f64,
    pub system_pearson: f64,
    pub order_violations: Vec<usize>,
}

/// Train on one scaled split of the planted campaign and evaluate on its test part.
pub fn run(p: &Planted, seed: u64, cfg: &TrainConfig) -> Run {
    let scores = bws_scores(&p.campaign, &p.selections).unwrap().scores;
    let rr = to_relative_ranking(&scores);
    let sizes = SplitSizes::STANDARD.scaled_to(p.abstract_ids.len()).unwrap();
    let split = &make_metric_splits(&p.abstract_ids, 1, sizes, seed).unwrap()[0];
    let (tr, dev, test) = (subset(&rr, &split.train), subset(&rr, &split.dev), subset(&rr, &split.test));
    let m = train(&tr, &dev, &p.store, cfg).unwrap();
    let init = train(&tr, &dev, &p.store, &TrainConfig { epochs: 0, ..cfg.clone() }).unwrap();

    let metric = candidate_scores(&m.model, &test, &p.store).unwrap();
    let test_ids: HashSet<&str> = split.test.iter().map(String::as_str).collect();
    let mut by_system: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for s in scores.iter().filter(|s| test_ids.contains(s.abstract_id.as_str())) {
        if let Some(v) = metric.get(&s.candidate_id) {
            let e = by_system.entry(&s.system).or_default();
            e.0.push(s.score);
            e.1.push(*v);
        }
    }
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let human: Vec<f64> = by_system.values().map(|v| mean(&v.0)).collect();
    let auto: Vec<f64> = by_system.values().map(|v| mean(&v.1)).collect();
    Run {
        test_tau: evaluate(&m.model, &test, &p.store).unwrap().tau,
        init_test_tau: evaluate(&init.model, &test, &p.store).unwrap().tau,
        system_pearson: pearson(&human, &auto).unwrap(),
        order_violations: m.report.epochs.iter().map(|e| e.order_violations).collect(),
    }
}
