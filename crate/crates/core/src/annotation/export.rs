use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BwsSelection, Campaign, CampaignKind, EffectiveState, Judgment, PairOutcome};
use crate::{Error, Result};

/// What an annotator is shown: candidates in their presentation order, no system tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorTask {
    pub campaign_id: String,
    pub kind: CampaignKind,
    pub instance_id: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub candidates: Vec<TaskCandidate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskCandidate {
    pub candidate_id: String,
    pub title: String,
}

impl Campaign {
    pub fn task_for(&self, instance_id: &str, annotator: &str) -> Option<AnnotatorTask> {
        let inst = self.instance(instance_id)?;
        let order = self.presentation_order(instance_id, annotator)?;
        Some(AnnotatorTask {
            campaign_id: self.id.clone(),
            kind: self.kind,
            instance_id: inst.id.clone(),
            abstract_text: inst.abstract_text.clone(),
            candidates: order
                .iter()
                .map(|&k| TaskCandidate {
                    candidate_id: inst.candidates[k].id.clone(),
                    title: inst.candidates[k].title.clone(),
                })
                .collect(),
        })
    }

    /// Instances assigned to `annotator`, in campaign order.
    pub fn assigned_instances<'a>(&'a self, annotator: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.instances
            .iter()
            .filter(move |i| self.is_assigned(&i.id, annotator))
            .map(|i| i.id.as_str())
    }
}

/// First assigned instance the annotator has not judged yet, plus how many remain (including it).
pub fn next_task(campaign: &Campaign, state: &EffectiveState, annotator: &str) -> (Option<AnnotatorTask>, usize) {
    let open: Vec<&str> = campaign
        .assigned_instances(annotator)
        .filter(|i| !state.has_judgment(i, annotator))
        .collect();
    let task = open.first().and_then(|i| campaign.task_for(i, annotator));
    (task, open.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportView {
    /// Without system tags.
    Annotator,
    /// With system tags.
    Analysis,
}

impl FromStr for ExportView {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "annotator" => Ok(ExportView::Annotator),
            "analysis" => Ok(ExportView::Analysis),
            other => Err(format!("unknown export view {other:?}")),
        }
    }
}

/// One row per (judgment, candidate). Rows follow campaign instance order, then
/// annotator id, then criterion, then the instance's canonical candidate order.
pub fn export_csv(campaign: &Campaign, state: &EffectiveState, view: ExportView) -> Result<String> {
    let with_tags = view == ExportView::Analysis;
    let mut header = vec!["instance_id", "annotator_id"];
    if campaign.kind == CampaignKind::Ranking {
        header.push("criterion");
    }
    header.push("candidate_id");
    if with_tags {
        header.push("system_tag");
    }
    match campaign.kind {
        CampaignKind::BestWorst => header.extend(["best", "worst"]),
        CampaignKind::Ranking => header.push("rank"),
        CampaignKind::Pairwise => header.push("outcome"),
    }

    let mut by_instance: BTreeMap<&str, Vec<&Judgment>> = BTreeMap::new();
    for j in state.judgments() {
        by_instance.entry(j.instance_id()).or_default().push(j);
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for inst in &campaign.instances {
        let Some(judgments) = by_instance.get(inst.id.as_str()) else {
            continue;
        };
        for j in judgments {
            for (k, cand) in inst.candidates.iter().enumerate() {
                let mut row: Vec<String> = vec![inst.id.clone(), j.annotator_id().to_string()];
                if let Judgment::Ranking(r) = j {
                    row.push(r.criterion.clone());
                }
                row.push(cand.id.clone());
                if with_tags {
                    row.push(cand.system.clone());
                }
                match j {
                    Judgment::BestWorst(s) => {
                        row.push(u8::from(s.best.contains(&cand.id)).to_string());
                        row.push(u8::from(s.worst.contains(&cand.id)).to_string());
                    }
                    Judgment::Ranking(r) => row.push(r.rank_of.get(&cand.id).map(u32::to_string).unwrap_or_default()),
                    Judgment::Pairwise(p) => row.push(
                        match (p.choice, k) {
                            (PairOutcome::Equal, _) => "equal",
                            (PairOutcome::First, 0) | (PairOutcome::Second, 1) => "better",
                            _ => "worse",
                        }
                        .to_string(),
                    ),
                }
                w.write_record(&row)?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

#[derive(Deserialize)]
struct BwsExportRow {
    instance_id: String,
    annotator_id: String,
    candidate_id: String,
    best: u8,
    worst: u8,
}

/// Rebuild best-worst selections from an exported CSV (either view).
pub fn parse_bws_export(text: &str) -> Result<Vec<BwsSelection>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut grouped: BTreeMap<(String, String), BwsSelection> = BTreeMap::new();
    let mut order = Vec::new();
    let mut seen = BTreeSet::new();
    let headers = rdr.headers()?.clone();
    for rec in rdr.records() {
        let rec = rec?;
        let row: BwsExportRow = rec.deserialize(Some(&headers))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if row.best > 1 || row.worst > 1 {
            return Err(Error::parse(line, "best/worst flags must be 0 or 1"));
        }
        if row.best == 1 && row.worst == 1 {
            return Err(Error::parse(line, format!("{} is marked both best and worst", row.candidate_id)));
        }
        if !seen.insert((row.instance_id.clone(), row.annotator_id.clone(), row.candidate_id.clone())) {
            return Err(Error::parse(line, format!("duplicate row for {}", row.candidate_id)));
        }
        let key = (row.instance_id.clone(), row.annotator_id.clone());
        let sel = grouped.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            BwsSelection {
                instance_id: row.instance_id,
                annotator_id: row.annotator_id,
                best: Default::default(),
                worst: Default::default(),
                timestamp_ms: 0,
            }
        });
        if row.best == 1 {
            sel.best.insert(row.candidate_id.clone());
        }
        if row.worst == 1 {
            sel.worst.insert(row.candidate_id);
        }
    }
    Ok(order.into_iter().map(|k| grouped.remove(&k).expect("key recorded")).collect())
}
