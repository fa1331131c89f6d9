//! Best-worst scaling, relative-ranking conversion, average ranks and best/worst shares.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::annotation::{BwsSelection, Campaign, CampaignKind, RankAnnotation};
use crate::stats::format_table;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BwsScore {
    pub instance_id: String,
    pub abstract_id: String,
    pub candidate_id: String,
    #[serde(rename = "system_tag")]
    pub system: String,
    pub n_best: u32,
    pub n_worst: u32,
    pub n_annotators: u32,
    #[serde(rename = "bws")]
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcludedInstance {
    pub instance_id: String,
    pub annotators: usize,
    pub required: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BwsScoring {
    /// Campaign instance order, then canonical candidate order.
    pub scores: Vec<BwsScore>,
    /// Instances with fewer annotators than the campaign minimum.
    pub excluded: Vec<ExcludedInstance>,
}

/// `(N_best - N_worst) / N_annotators` per candidate, where `N_annotators`
/// counts the annotators who judged that instance. When an annotator appears
/// twice for an instance the later selection wins.
pub fn bws_scores(campaign: &Campaign, selections: &[BwsSelection]) -> Result<BwsScoring> {
    if campaign.kind != CampaignKind::BestWorst {
        return Err(Error::invalid("wrong_kind", format!("campaign {} is not best-worst", campaign.id)));
    }
    let mut latest: HashMap<&str, BTreeMap<&str, &BwsSelection>> = HashMap::new();
    for s in selections {
        let inst = campaign.instance(&s.instance_id).ok_or_else(|| Error::Unknown {
            what: "instance",
            id: s.instance_id.clone(),
        })?;
        s.check(inst)?;
        latest.entry(&s.instance_id).or_default().insert(&s.annotator_id, s);
    }

    let mut scores = Vec::new();
    let mut excluded = Vec::new();
    for inst in &campaign.instances {
        let judged = latest.get(inst.id.as_str());
        let n = judged.map_or(0, BTreeMap::len);
        if n < campaign.min_annotators_per_instance {
            excluded.push(ExcludedInstance {
                instance_id: inst.id.clone(),
                annotators: n,
                required: campaign.min_annotators_per_instance,
            });
            continue;
        }
        let judged = judged.expect("n > 0");
        for cand in &inst.candidates {
            let n_best = judged.values().filter(|s| s.best.contains(&cand.id)).count() as u32;
            let n_worst = judged.values().filter(|s| s.worst.contains(&cand.id)).count() as u32;
            scores.push(BwsScore {
                instance_id: inst.id.clone(),
                abstract_id: inst.abstract_id.clone(),
                candidate_id: cand.id.clone(),
                system: cand.system.clone(),
                n_best,
                n_worst,
                n_annotators: n as u32,
                score: (f64::from(n_best) - f64::from(n_worst)) / n as f64,
            });
        }
    }
    Ok(BwsScoring { scores, excluded })
}

/// Unweighted mean BWS per system.
pub fn system_bws(scores: &[BwsScore]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for s in scores {
        let e = acc.entry(s.system.clone()).or_default();
        e.0 += s.score;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (sum, n))| (k, sum / n as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeRankingJudgment {
    pub abstract_id: String,
    pub better_candidate_id: String,
    pub worse_candidate_id: String,
    /// `BWS(better) - BWS(worse)`, always positive.
    pub score_diff: f64,
}

/// Every candidate pair of an abstract with unequal BWS becomes one
/// better-to-worse judgment. Abstracts appear in first-seen order, pairs in
/// input order.
pub fn to_relative_ranking(scores: &[BwsScore]) -> Vec<RelativeRankingJudgment> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&BwsScore>> = HashMap::new();
    for s in scores {
        groups
            .entry(&s.abstract_id)
            .or_insert_with(|| {
                order.push(&s.abstract_id);
                Vec::new()
            })
            .push(s);
    }
    let mut out = Vec::new();
    for abs in order {
        let g = &groups[abs];
        for (i, x) in g.iter().enumerate() {
            for y in &g[i + 1..] {
                let (better, worse) = if x.score > y.score {
                    (x, y)
                } else if y.score > x.score {
                    (y, x)
                } else {
                    continue;
                };
                out.push(RelativeRankingJudgment {
                    abstract_id: abs.to_string(),
                    better_candidate_id: better.candidate_id.clone(),
                    worse_candidate_id: worse.candidate_id.clone(),
                    score_diff: better.score - worse.score,
                });
            }
        }
    }
    out
}

pub fn write_scores_csv(scores: &[BwsScore]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "instance_id",
        "abstract_id",
        "candidate_id",
        "system_tag",
        "n_best",
        "n_worst",
        "n_annotators",
        "bws",
    ])?;
    for s in scores {
        w.write_record([
            s.instance_id.clone(),
            s.abstract_id.clone(),
            s.candidate_id.clone(),
            s.system.clone(),
            s.n_best.to_string(),
            s.n_worst.to_string(),
            s.n_annotators.to_string(),
            // shortest representation that round-trips
            format!("{:?}", s.score),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

/// Parse a score CSV and re-check every row against the BWS formula.
pub fn parse_scores_csv(text: &str) -> Result<Vec<BwsScore>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for row in rdr.deserialize::<BwsScore>() {
        let s = row?;
        let line = out.len() + 2;
        if s.n_annotators == 0 || s.n_best > s.n_annotators || s.n_worst > s.n_annotators {
            return Err(Error::parse(line, "counts out of range"));
        }
        let expect = (f64::from(s.n_best) - f64::from(s.n_worst)) / f64::from(s.n_annotators);
        if !s.score.is_finite() || (s.score - expect).abs() > 1e-9 {
            return Err(Error::parse(line, format!("bws {} does not match counts ({expect})", s.score)));
        }
        if !seen.insert((s.instance_id.clone(), s.candidate_id.clone())) {
            return Err(Error::DuplicateId(format!("{}/{}", s.instance_id, s.candidate_id)));
        }
        out.push(s);
    }
    Ok(out)
}

pub fn write_rr_jsonl(judgments: &[RelativeRankingJudgment]) -> String {
    let mut out = String::new();
    for j in judgments {
        out.push_str(&serde_json::to_string(j).expect("plain struct"));
        out.push('\n');
    }
    out
}

pub fn parse_rr_jsonl<R: BufRead>(reader: R) -> Result<Vec<RelativeRankingJudgment>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let j: RelativeRankingJudgment =
            serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if !(j.score_diff.is_finite() && j.score_diff > 0.0) {
            return Err(Error::parse(i + 1, format!("score_diff must be positive, got {}", j.score_diff)));
        }
        if j.better_candidate_id == j.worse_candidate_id {
            return Err(Error::parse(i + 1, "better and worse candidate are the same"));
        }
        out.push(j);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCell {
    pub group: String,
    pub criterion: String,
    pub system: String,
    pub mean_rank: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageRankTable {
    pub cells: Vec<RankCell>,
    /// Systems present in the campaign that received no ranks.
    pub omitted: Vec<String>,
}

/// Mean assigned rank per (group, criterion, system); smaller is better.
/// `group_of` maps instance id to a group label (e.g. the original title's humor
/// label); instances without an entry fall into group `"all"`.
pub fn average_rank(
    campaign: &Campaign,
    rankings: &[RankAnnotation],
    group_of: &BTreeMap<String, String>,
) -> Result<AverageRankTable> {
    let mut acc: BTreeMap<(String, String, String), (f64, usize)> = BTreeMap::new();
    let mut all_systems: BTreeSet<&str> = BTreeSet::new();
    for inst in &campaign.instances {
        all_systems.extend(inst.candidates.iter().map(|c| c.system.as_str()));
    }
    let mut ranked: BTreeSet<String> = BTreeSet::new();
    let mut latest: BTreeMap<(&str, &str, &str), &RankAnnotation> = BTreeMap::new();
    for r in rankings {
        latest.insert((&r.instance_id, &r.annotator_id, &r.criterion), r);
    }
    for r in latest.values() {
        let inst = campaign.instance(&r.instance_id).ok_or_else(|| Error::Unknown {
            what: "instance",
            id: r.instance_id.clone(),
        })?;
        r.check(inst)?;
        let group = group_of.get(&r.instance_id).cloned().unwrap_or_else(|| "all".into());
        for cand in &inst.candidates {
            let rank = r.rank_of[&cand.id];
            let e = acc
                .entry((group.clone(), r.criterion.clone(), cand.system.clone()))
                .or_default();
            e.0 += f64::from(rank);
            e.1 += 1;
            ranked.insert(cand.system.clone());
        }
    }
    let cells = acc
        .into_iter()
        .map(|((group, criterion, system), (sum, n))| RankCell {
            group,
            criterion,
            system,
            mean_rank: sum / n as f64,
            n,
        })
        .collect();
    let omitted = all_systems
        .into_iter()
        .filter(|s| !ranked.contains(*s))
        .map(str::to_string)
        .collect();
    Ok(AverageRankTable { cells, omitted })
}

#[derive(Deserialize)]
struct RankCellRow {
    group: String,
    criterion: String,
    system: String,
    mean_rank: f64,
    #[serde(default)]
    n: usize,
}

impl AverageRankTable {
    /// Long-format CSV: `group,criterion,system,mean_rank[,n]`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut cells = Vec::new();
        for row in rdr.deserialize::<RankCellRow>() {
            let r = row?;
            cells.push(RankCell {
                group: r.group,
                criterion: r.criterion,
                system: r.system,
                mean_rank: r.mean_rank,
                n: r.n,
            });
        }
        Ok(AverageRankTable {
            cells,
            omitted: Vec::new(),
        })
    }

    pub fn get(&self, group: &str, criterion: &str, system: &str) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.group == group && c.criterion == criterion && c.system == system)
            .map(|c| c.mean_rank)
    }

    /// Systems as rows, one column per `group/criterion` in first-seen order.
    pub fn render_text(&self) -> String {
        let mut columns: Vec<(String, String)> = Vec::new();
        let mut systems: Vec<String> = Vec::new();
        for c in &self.cells {
            let key = (c.group.clone(), c.criterion.clone());
            if !columns.contains(&key) {
                columns.push(key);
            }
            if !systems.contains(&c.system) {
                systems.push(c.system.clone());
            }
        }
        let mut header = vec!["system".to_string()];
        header.extend(columns.iter().map(|(g, c)| format!("{g}/{c}")));
        let rows: Vec<Vec<String>> = systems
            .iter()
            .map(|s| {
                let mut row = vec![s.clone()];
                row.extend(
                    columns
                        .iter()
                        .map(|(g, c)| self.get(g, c, s).map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into())),
                );
                row
            })
            .collect();
        format_table(&header, &rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemShare {
    pub system: String,
    pub best: u64,
    pub worst: u64,
    pub best_share: f64,
    pub worst_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestWorstDistribution {
    pub systems: Vec<SystemShare>,
}

impl BestWorstDistribution {
    /// From `(system, best picks, worst picks)`; input order is kept.
    pub fn from_counts(counts: &[(String, u64, u64)]) -> Result<Self> {
        let total_best: u64 = counts.iter().map(|c| c.1).sum();
        let total_worst: u64 = counts.iter().map(|c| c.2).sum();
        if total_best == 0 || total_worst == 0 {
            return Err(Error::Empty("no best or no worst picks".into()));
        }
        Ok(BestWorstDistribution {
            systems: counts
                .iter()
                .map(|(s, b, w)| SystemShare {
                    system: s.clone(),
                    best: *b,
                    worst: *w,
                    best_share: *b as f64 / total_best as f64,
                    worst_share: *w as f64 / total_worst as f64,
                })
                .collect(),
        })
    }

    pub fn get(&self, system: &str) -> Option<&SystemShare> {
        self.systems.iter().find(|s| s.system == system)
    }

    /// Percentages with one decimal.
    pub fn render_text(&self) -> String {
        let header = ["system", "best", "worst"].map(String::from);
        let rows: Vec<Vec<String>> = self
            .systems
            .iter()
            .map(|s| {
                vec![
                    s.system.clone(),
                    format!("{:.1}%", 100.0 * s.best_share),
                    format!("{:.1}%", 100.0 * s.worst_share),
                ]
            })
            .collect();
        format_table(&header, &rows)
    }
}

/// Share of best and worst picks that went to each system (latest selection per annotator).
pub fn best_worst_distribution(campaign: &Campaign, selections: &[BwsSelection]) -> Result<BestWorstDistribution> {
    let mut latest: BTreeMap<(&str, &str), &BwsSelection> = BTreeMap::new();
    for s in selections {
        latest.insert((&s.instance_id, &s.annotator_id), s);
    }
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for inst in &campaign.instances {
        for c in &inst.candidates {
            counts.entry(c.system.clone()).or_default();
        }
    }
    for s in latest.values() {
        let inst = campaign.instance(&s.instance_id).ok_or_else(|| Error::Unknown {
            what: "instance",
            id: s.instance_id.clone(),
        })?;
        s.check(inst)?;
        for c in &inst.candidates {
            let e = counts.get_mut(&c.system).expect("system registered");
            e.0 += u64::from(s.best.contains(&c.id));
            e.1 += u64::from(s.worst.contains(&c.id));
        }
    }
    let counts: Vec<(String, u64, u64)> = counts.into_iter().map(|(s, (b, w))| (s, b, w)).collect();
    BestWorstDistribution::from_counts(&counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::tests::{bws, instance};
    use crate::annotation::{create_campaign, AssignmentPolicy, CampaignOptions};

    fn campaign(annotators: &[&str]) -> Campaign {
        create_campaign(
            "c",
            CampaignKind::BestWorst,
            vec![instance("i0", 6), instance("i1", 6)],
            Some(&AssignmentPolicy::All(annotators.iter().map(|s| s.to_string()).collect())),
            CampaignOptions::default(),
        )
        .unwrap()
    }

    fn score(s: &[BwsScore], cand: &str) -> f64 {
        s.iter().find(|x| x.candidate_id == cand).unwrap().score
    }

    #[test]
    fn formula_and_zero_case() {
        let c = campaign(&["a", "b", "c"]);
        let sel = [
            bws("i0", "a", [0, 1], [2, 3]),
            bws("i0", "b", [0, 2], [1, 3]),
            bws("i0", "c", [1, 4], [0, 3]),
        ];
        let r = bws_scores(&c, &sel).unwrap();
        assert!((score(&r.scores, "i0-c0") - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(score(&r.scores, "i0-c5"), 0.0);
        assert_eq!(score(&r.scores, "i0-c3"), -1.0);
        assert_eq!(r.excluded.len(), 1);
        assert_eq!(r.excluded[0].instance_id, "i1");
    }

    #[test]
    fn resubmission_latest_wins() {
        let c = campaign(&["a", "b"]);
        let sel = [
            bws("i0", "a", [0, 1], [2, 3]),
            bws("i0", "b", [0, 1], [2, 3]),
            bws("i0", "a", [4, 5], [2, 3]),
        ];
        let r = bws_scores(&c, &sel).unwrap();
        assert_eq!(score(&r.scores, "i0-c0"), 0.5);
        assert_eq!(score(&r.scores, "i0-c4"), 0.5);
        assert_eq!(r.scores[0].n_annotators, 2);
    }

    fn s(abs: &str, cand: &str, v: f64) -> BwsScore {
        BwsScore {
            instance_id: abs.into(),
            abstract_id: abs.into(),
            candidate_id: cand.into(),
            system: "x".into(),
            n_best: 0,
            n_worst: 0,
            n_annotators: 2,
            score: v,
        }
    }

    #[test]
    fn rr_conversion_by_hand() {
        let rr = to_relative_ranking(&[s("a", "x", 0.5), s("a", "y", 0.0), s("a", "z", -0.5)]);
        let diffs: Vec<f64> = rr.iter().map(|j| j.score_diff).collect();
        assert_eq!(diffs, [0.5, 1.0, 0.5]);
        assert_eq!(rr[0].better_candidate_id, "x");
        let tied: Vec<BwsScore> = (0..6).map(|k| s("a", &format!("c{k}"), 0.0)).collect();
        assert!(to_relative_ranking(&tied).is_empty());
        let distinct: Vec<BwsScore> = (0..6).map(|k| s("a", &format!("c{k}"), f64::from(k))).collect();
        assert_eq!(to_relative_ranking(&distinct).len(), 15);
        // never pairs across abstracts
        assert_eq!(to_relative_ranking(&[s("a", "x", 1.0), s("b", "y", 0.0)]).len(), 0);
    }

    #[test]
    fn csv_and_jsonl_round_trip() {
        let c = campaign(&["a", "b"]);
        let sel = [bws("i0", "a", [0, 1], [2, 3]), bws("i0", "b", [0, 4], [2, 5])];
        let scores = bws_scores(&c, &sel).unwrap().scores;
        let text = write_scores_csv(&scores).unwrap();
        assert_eq!(parse_scores_csv(&text).unwrap(), scores);
        assert!(text.contains(",2,0,2,1.0"));
        let bad = text.replacen(",2,0,2,1.0", ",2,0,2,0.9", 1);
        assert!(parse_scores_csv(&bad).is_err());

        let rr = to_relative_ranking(&scores);
        assert_eq!(parse_rr_jsonl(write_rr_jsonl(&rr).as_bytes()).unwrap(), rr);
        let zero = r#"{"abstract_id":"a","better_candidate_id":"x","worse_candidate_id":"y","score_diff":0.0}"#;
        assert!(parse_rr_jsonl(zero.as_bytes()).is_err());
    }

    #[test]
    fn distribution_single_system() {
        let mut inst = instance("i0", 6);
        for c in &mut inst.candidates {
            c.system = "only".into();
        }
        let c = create_campaign(
            "c",
            CampaignKind::BestWorst,
            vec![inst],
            Some(&AssignmentPolicy::All(vec!["a".into(), "b".into()])),
            CampaignOptions::default(),
        )
        .unwrap();
        let d = best_worst_distribution(&c, &[bws("i0", "a", [0, 1], [2, 3])]).unwrap();
        assert_eq!(d.systems.len(), 1);
        assert_eq!((d.systems[0].best_share, d.systems[0].worst_share), (1.0, 1.0));
    }

    #[test]
    fn rank_table_csv_render() {
        let t = AverageRankTable::from_csv(
            "group,criterion,system,mean_rank\nFUNNY,humor,BART_xsum,1.94\nFUNNY,quality,BART_xsum,2.70\nFUNNY,quality,HUMAN,2.86\n",
        )
        .unwrap();
        assert_eq!(t.get("FUNNY", "quality", "HUMAN"), Some(2.86));
        let text = t.render_text();
        assert!(text.contains("FUNNY/quality"));
        assert!(text.lines().any(|l| l.starts_with("HUMAN") && l.ends_with("2.86")));
    }
}
