//! Annotation campaigns: best-worst selection over six titles, five-title ranking
//! with ties, and pairwise better/worse/equal choice.

mod agreement;
mod export;
mod log;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{seed, Error, Result};

pub use agreement::{
    cohen_kappa, pairwise_rank_correlation, percentage_agreement, selection_agreement, AgreementReport,
    PairAgreement, PairRankCorrelation, RankAgreementReport, SkippedInstance,
};
pub use export::{export_csv, next_task, parse_bws_export, AnnotatorTask, ExportView, TaskCandidate};
pub use log::{parse_log, EffectiveState, JudgmentKey, JudgmentLog, LogEntry, ParsedLog, Receipt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignKind {
    BestWorst,
    Ranking,
    Pairwise,
}

impl CampaignKind {
    /// Number of candidate titles every instance of this kind must have.
    pub fn arity(self) -> usize {
        match self {
            CampaignKind::BestWorst => 6,
            CampaignKind::Ranking => 5,
            CampaignKind::Pairwise => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CampaignKind::BestWorst => "best_worst",
            CampaignKind::Ranking => "ranking",
            CampaignKind::Pairwise => "pairwise",
        }
    }
}

impl fmt::Display for CampaignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CampaignKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "best_worst" | "bws" | "best-worst" => Ok(CampaignKind::BestWorst),
            "ranking" | "rank" => Ok(CampaignKind::Ranking),
            "pairwise" | "pair" => Ok(CampaignKind::Pairwise),
            other => Err(format!("unknown campaign kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub title: String,
    /// Generating system (e.g. `HUMAN`). Never shown to annotators.
    pub system: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub abstract_id: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
    pub candidates: Vec<Candidate>,
}

impl TaskInstance {
    pub fn candidate(&self, id: &str) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentPolicy {
    /// Every annotator judges every instance.
    All(Vec<String>),
    /// Instance `i` goes to `per_instance` consecutive annotators starting at `i * per_instance`.
    RoundRobin {
        annotators: Vec<String>,
        per_instance: usize,
    },
    /// Explicit instance id -> annotators map; every instance must be listed.
    Explicit(BTreeMap<String, Vec<String>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignOptions {
    pub min_annotators_per_instance: usize,
    pub max_annotators_per_instance: usize,
    pub seed: u64,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        CampaignOptions {
            min_annotators_per_instance: 2,
            max_annotators_per_instance: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub id: String,
    pub kind: CampaignKind,
    pub instances: Vec<TaskInstance>,
    pub min_annotators_per_instance: usize,
    pub max_annotators_per_instance: usize,
    pub seed: u64,
    /// instance id -> assigned annotators, in assignment order.
    #[serde(default)]
    pub assignments: BTreeMap<String, Vec<String>>,
    /// instance id -> annotator -> permutation of candidate indices.
    #[serde(default)]
    pub presentation_orders: BTreeMap<String, BTreeMap<String, Vec<usize>>>,
}

pub fn create_campaign(
    id: &str,
    kind: CampaignKind,
    instances: Vec<TaskInstance>,
    policy: Option<&AssignmentPolicy>,
    options: CampaignOptions,
) -> Result<Campaign> {
    if options.min_annotators_per_instance == 0
        || options.min_annotators_per_instance > options.max_annotators_per_instance
    {
        return Err(Error::Config(format!(
            "annotator bounds must satisfy 1 <= min <= max, got min {} max {}",
            options.min_annotators_per_instance, options.max_annotators_per_instance
        )));
    }
    let mut instance_ids = HashSet::new();
    let mut candidate_ids = HashSet::new();
    for inst in &instances {
        if !instance_ids.insert(inst.id.as_str()) {
            return Err(Error::DuplicateId(inst.id.clone()));
        }
        if inst.candidates.len() != kind.arity() {
            return Err(Error::Arity {
                instance: inst.id.clone(),
                kind: kind.name(),
                expected: kind.arity(),
                got: inst.candidates.len(),
            });
        }
        for c in &inst.candidates {
            if !candidate_ids.insert(c.id.as_str()) {
                return Err(Error::DuplicateId(c.id.clone()));
            }
        }
    }
    let mut campaign = Campaign {
        id: id.to_string(),
        kind,
        instances,
        min_annotators_per_instance: options.min_annotators_per_instance,
        max_annotators_per_instance: options.max_annotators_per_instance,
        seed: options.seed,
        assignments: BTreeMap::new(),
        presentation_orders: BTreeMap::new(),
    };
    if let Some(policy) = policy {
        campaign.assign(policy)?;
    }
    Ok(campaign)
}

impl Campaign {
    pub fn instance(&self, id: &str) -> Option<&TaskInstance> {
        self.instances.iter().find(|i| i.id == id)
    }

    pub fn annotators(&self) -> BTreeSet<&str> {
        self.assignments.values().flatten().map(String::as_str).collect()
    }

    pub fn is_assigned(&self, instance_id: &str, annotator: &str) -> bool {
        self.assignments
            .get(instance_id)
            .is_some_and(|a| a.iter().any(|x| x == annotator))
    }

    /// Replace assignments and regenerate per-annotator presentation orders.
    pub fn assign(&mut self, policy: &AssignmentPolicy) -> Result<()> {
        let mut assignments = BTreeMap::new();
        match policy {
            AssignmentPolicy::All(annotators) => {
                for inst in &self.instances {
                    assignments.insert(inst.id.clone(), annotators.clone());
                }
            }
            AssignmentPolicy::RoundRobin {
                annotators,
                per_instance,
            } => {
                if *per_instance > annotators.len() {
                    return Err(Error::Config(format!(
                        "per_instance {per_instance} exceeds the {} available annotators",
                        annotators.len()
                    )));
                }
                for (i, inst) in self.instances.iter().enumerate() {
                    let picked = (0..*per_instance)
                        .map(|j| annotators[(i * per_instance + j) % annotators.len()].clone())
                        .collect();
                    assignments.insert(inst.id.clone(), picked);
                }
            }
            AssignmentPolicy::Explicit(map) => {
                for inst in &self.instances {
                    let a = map.get(&inst.id).ok_or_else(|| {
                        Error::Config(format!("instance {:?} missing from explicit assignment", inst.id))
                    })?;
                    assignments.insert(inst.id.clone(), a.clone());
                }
                if let Some(extra) = map.keys().find(|k| self.instance(k).is_none()) {
                    return Err(Error::Unknown {
                        what: "instance",
                        id: extra.clone(),
                    });
                }
            }
        }
        for (inst, annotators) in &assignments {
            let distinct: HashSet<_> = annotators.iter().collect();
            if distinct.len() != annotators.len() {
                return Err(Error::Config(format!("instance {inst:?} lists an annotator twice")));
            }
            let n = annotators.len();
            if n < self.min_annotators_per_instance || n > self.max_annotators_per_instance {
                return Err(Error::Config(format!(
                    "instance {inst:?} gets {n} annotators, allowed range is {}..={}",
                    self.min_annotators_per_instance, self.max_annotators_per_instance
                )));
            }
        }

        let mut orders = BTreeMap::new();
        for inst in &self.instances {
            let mut per_annotator = BTreeMap::new();
            for annotator in &assignments[&inst.id] {
                let mut rng = seed::derived_rng(self.seed, &[inst.id.as_bytes(), annotator.as_bytes()]);
                let mut order: Vec<usize> = (0..inst.candidates.len()).collect();
                order.shuffle(&mut rng);
                per_annotator.insert(annotator.clone(), order);
            }
            orders.insert(inst.id.clone(), per_annotator);
        }
        self.assignments = assignments;
        self.presentation_orders = orders;
        Ok(())
    }

    pub fn presentation_order(&self, instance_id: &str, annotator: &str) -> Option<&[usize]> {
        self.presentation_orders
            .get(instance_id)
            .and_then(|m| m.get(annotator))
            .map(Vec::as_slice)
    }

    /// Check a judgment against this campaign: kind, instance, assignment and the
    /// judgment's own invariants.
    pub fn validate(&self, judgment: &Judgment) -> Result<()> {
        let expected = judgment.kind();
        if expected != self.kind {
            return Err(Error::invalid(
                "wrong_kind",
                format!("campaign {} expects {} judgments, got {}", self.id, self.kind, expected),
            ));
        }
        let inst = self.instance(judgment.instance_id()).ok_or_else(|| Error::Unknown {
            what: "instance",
            id: judgment.instance_id().to_string(),
        })?;
        if !self.is_assigned(&inst.id, judgment.annotator_id()) {
            return Err(Error::invalid(
                "unassigned_annotator",
                format!(
                    "annotator {:?} is not assigned to instance {:?}",
                    judgment.annotator_id(),
                    inst.id
                ),
            ));
        }
        judgment.check(inst)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BwsSelection {
    pub instance_id: String,
    pub annotator_id: String,
    pub best: BTreeSet<String>,
    pub worst: BTreeSet<String>,
    #[serde(default)]
    pub timestamp_ms: u64,
}

impl BwsSelection {
    pub fn check(&self, instance: &TaskInstance) -> Result<()> {
        if self.best.len() != 2 || self.worst.len() != 2 {
            return Err(Error::invalid(
                "wrong_set_size",
                format!(
                    "exactly two best and two worst titles are required, got {} and {}",
                    self.best.len(),
                    self.worst.len()
                ),
            ));
        }
        if let Some(both) = self.best.intersection(&self.worst).next() {
            return Err(Error::invalid(
                "overlapping_selection",
                format!("candidate {both:?} is selected as both best and worst"),
            ));
        }
        for id in self.best.iter().chain(&self.worst) {
            if instance.candidate(id).is_none() {
                return Err(Error::invalid(
                    "unknown_candidate",
                    format!("candidate {id:?} is not part of instance {:?}", instance.id),
                ));
            }
        }
        Ok(())
    }

    /// Same judgment with best and worst exchanged.
    pub fn swapped(&self) -> Self {
        BwsSelection {
            best: self.worst.clone(),
            worst: self.best.clone(),
            ..self.clone()
        }
    }
}

pub const DEFAULT_CRITERION: &str = "quality";

fn default_criterion() -> String {
    DEFAULT_CRITERION.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankAnnotation {
    pub instance_id: String,
    pub annotator_id: String,
    /// Ranking criterion, e.g. `quality` or `humor`.
    #[serde(default = "default_criterion")]
    pub criterion: String,
    pub rank_of: BTreeMap<String, u32>,
    #[serde(default)]
    pub timestamp_ms: u64,
}

impl RankAnnotation {
    pub fn check(&self, instance: &TaskInstance) -> Result<()> {
        if self.criterion.trim().is_empty() {
            return Err(Error::invalid("missing_criterion", "ranking criterion must not be empty"));
        }
        for id in self.rank_of.keys() {
            if instance.candidate(id).is_none() {
                return Err(Error::invalid(
                    "unknown_candidate",
                    format!("candidate {id:?} is not part of instance {:?}", instance.id),
                ));
            }
        }
        if let Some(missing) = instance.candidates.iter().find(|c| !self.rank_of.contains_key(&c.id)) {
            return Err(Error::invalid(
                "incomplete_ranking",
                format!("candidate {:?} has no rank", missing.id),
            ));
        }
        let ranks: Vec<u32> = self.rank_of.values().copied().collect();
        if competition_ranks(&ranks) != ranks {
            return Err(Error::invalid(
                "ranks_not_compressed",
                format!("ranks {ranks:?} are not tie-compressed competition ranks starting at 1"),
            ));
        }
        Ok(())
    }
}

/// Standard competition ranks ("1224"): each value's rank is one plus the number
/// of strictly smaller values.
pub fn competition_ranks<T: PartialOrd>(values: &[T]) -> Vec<u32> {
    values
        .iter()
        .map(|v| 1 + values.iter().filter(|w| *w < v).count() as u32)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairOutcome {
    First,
    Second,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairChoice {
    pub instance_id: String,
    pub annotator_id: String,
    pub choice: PairOutcome,
    #[serde(default)]
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Judgment {
    BestWorst(BwsSelection),
    Ranking(RankAnnotation),
    Pairwise(PairChoice),
}

impl Judgment {
    pub fn kind(&self) -> CampaignKind {
        match self {
            Judgment::BestWorst(_) => CampaignKind::BestWorst,
            Judgment::Ranking(_) => CampaignKind::Ranking,
            Judgment::Pairwise(_) => CampaignKind::Pairwise,
        }
    }

    pub fn instance_id(&self) -> &str {
        match self {
            Judgment::BestWorst(j) => &j.instance_id,
            Judgment::Ranking(j) => &j.instance_id,
            Judgment::Pairwise(j) => &j.instance_id,
        }
    }

    pub fn annotator_id(&self) -> &str {
        match self {
            Judgment::BestWorst(j) => &j.annotator_id,
            Judgment::Ranking(j) => &j.annotator_id,
            Judgment::Pairwise(j) => &j.annotator_id,
        }
    }

    pub fn timestamp_ms(&self) -> u64 {
        match self {
            Judgment::BestWorst(j) => j.timestamp_ms,
            Judgment::Ranking(j) => j.timestamp_ms,
            Judgment::Pairwise(j) => j.timestamp_ms,
        }
    }

    pub fn set_timestamp_ms(&mut self, ts: u64) {
        match self {
            Judgment::BestWorst(j) => j.timestamp_ms = ts,
            Judgment::Ranking(j) => j.timestamp_ms = ts,
            Judgment::Pairwise(j) => j.timestamp_ms = ts,
        }
    }

    /// Identity under which resubmissions replace earlier judgments.
    pub fn key(&self) -> JudgmentKey {
        let criterion = match self {
            Judgment::Ranking(r) => r.criterion.clone(),
            _ => String::new(),
        };
        JudgmentKey {
            instance_id: self.instance_id().to_string(),
            annotator_id: self.annotator_id().to_string(),
            criterion,
        }
    }

    pub fn check(&self, instance: &TaskInstance) -> Result<()> {
        match self {
            Judgment::BestWorst(j) => j.check(instance),
            Judgment::Ranking(j) => j.check(instance),
            Judgment::Pairwise(_) => Ok(()),
        }
    }
}
