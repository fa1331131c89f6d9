use std::collections::{BTreeSet, HashMap};

use a2t_core::annotation::{
    cohen_kappa, create_campaign, parse_log, AssignmentPolicy, BwsSelection, Campaign, CampaignKind,
    CampaignOptions, Candidate, Judgment, JudgmentLog, TaskInstance,
};
use a2t_core::humor::{ens_mv, ens_sum, macro_f1, F1Mode, LabelMatrix};
use a2t_core::metric::{loss, make_metric_splits, LossConfig, ProjectionModel, SplitSizes};
use a2t_core::scoring::{bws_scores, to_relative_ranking, RelativeRankingJudgment};
use a2t_core::stats::{kendall_wmt_tau, pearson, spearman};
use proptest::collection::vec;
use proptest::prelude::*;

fn campaign(instances: usize, annotators: usize) -> Campaign {
    let instances = (0..instances)
        .map(|i| TaskInstance {
            id: format!("i{i}"),
            abstract_id: format!("a{i}"),
            abstract_text: String::new(),
            candidates: (0..6)
                .map(|k| Candidate {
                    id: format!("a{i}-{k}"),
                    title: format!("t{k}"),
                    system: format!("s{k}"),
                })
                .collect(),
        })
        .collect();
    let ann = (0..annotators).map(|a| format!("ann{a}")).collect();
    let opts = CampaignOptions {
        min_annotators_per_instance: 1,
        max_annotators_per_instance: annotators.max(1),
        seed: 0,
    };
    create_campaign("c", CampaignKind::BestWorst, instances, Some(&AssignmentPolicy::All(ann)), opts).unwrap()
}

/// Each draw is (instance, annotator, permutation of the six candidates).
fn selections(draws: &[(usize, usize, Vec<usize>)]) -> Vec<BwsSelection> {
    draws
        .iter()
        .map(|(i, a, perm)| BwsSelection {
            instance_id: format!("i{i}"),
            annotator_id: format!("ann{a}"),
            best: perm[..2].iter().map(|k| format!("a{i}-{k}")).collect(),
            worst: perm[2..4].iter().map(|k| format!("a{i}-{k}")).collect(),
            timestamp_ms: 0,
        })
        .collect()
}

fn draws() -> impl Strategy<Value = Vec<(usize, usize, Vec<usize>)>> {
    vec((0..4usize, 0..3usize, Just((0..6).collect::<Vec<usize>>()).prop_shuffle()), 0..40)
}

fn matrix(k: usize, n: usize) -> impl Strategy<Value = LabelMatrix> {
    vec(vec(0..3u8, n), k).prop_map(move |labels| {
        LabelMatrix::new(
            (0..k).map(|c| format!("c{c}")).collect(),
            (0..n).map(|t| format!("t{t}")).collect(),
            labels,
        )
        .unwrap()
    })
}

fn distinct(n: usize) -> impl Strategy<Value = Vec<f64>> {
    Just((0..n).map(|i| i as f64).collect::<Vec<f64>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bws_scores_are_bounded_and_sum_to_zero(d in draws()) {
        let c = campaign(4, 3);
        let scoring = bws_scores(&c, &selections(&d)).unwrap();
        let mut per_instance: HashMap<&str, f64> = HashMap::new();
        for s in &scoring.scores {
            prop_assert!((-1.0..=1.0).contains(&s.score));
            prop_assert!(s.n_best + s.n_worst <= s.n_annotators);
            *per_instance.entry(&s.instance_id).or_default() += s.score;
        }
        // two best and two worst per selection
        for total in per_instance.values() {
            prop_assert!(total.abs() < 1e-12);
        }
    }

    #[test]
    fn resubmission_keeps_only_the_latest(d in draws(), again in 0..6usize) {
        prop_assume!(!d.is_empty());
        let c = campaign(4, 3);
        let mut sels = selections(&d);
        let mut last = sels[again % sels.len()].swapped();
        last.timestamp_ms = 1;
        sels.push(last.clone());
        let with = bws_scores(&c, &sels).unwrap();
        let without: Vec<BwsSelection> = sels
            .iter()
            .filter(|s| (s.instance_id != last.instance_id || s.annotator_id != last.annotator_id) || *s == &last)
            .cloned()
            .collect();
        prop_assert_eq!(with.scores, bws_scores(&c, &without).unwrap().scores);
    }

    #[test]
    fn relative_ranking_orders_strictly(d in draws()) {
        let scores = bws_scores(&campaign(4, 3), &selections(&d)).unwrap().scores;
        let by_id: HashMap<&str, f64> = scores.iter().map(|s| (s.candidate_id.as_str(), s.score)).collect();
        let rr = to_relative_ranking(&scores);
        let mut pairs = BTreeSet::new();
        for j in &rr {
            prop_assert!(by_id[j.better_candidate_id.as_str()] > by_id[j.worse_candidate_id.as_str()]);
            prop_assert!((by_id[j.better_candidate_id.as_str()] - by_id[j.worse_candidate_id.as_str()] - j.score_diff).abs() < 1e-12);
            prop_assert!(pairs.insert((j.better_candidate_id.clone(), j.worse_candidate_id.clone())));
        }
    }

    #[test]
    fn tau_flips_with_the_metric(scores in distinct(12), pairs in vec((0..12usize, 0..12usize), 1..60)) {
        let judgments: Vec<RelativeRankingJudgment> = pairs
            .iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| RelativeRankingJudgment {
                abstract_id: "x".into(),
                better_candidate_id: format!("t{a}"),
                worse_candidate_id: format!("t{b}"),
                score_diff: 1.0,
            })
            .collect();
        prop_assume!(!judgments.is_empty());
        let up: HashMap<String, f64> = scores.iter().enumerate().map(|(i, s)| (format!("t{i}"), *s)).collect();
        let down: HashMap<String, f64> = up.iter().map(|(k, v)| (k.clone(), -v)).collect();
        let a = kendall_wmt_tau(&judgments, &up).unwrap();
        let b = kendall_wmt_tau(&judgments, &down).unwrap();
        prop_assert!((-1.0..=1.0).contains(&a.tau));
        prop_assert!((a.tau + b.tau).abs() < 1e-12);
        prop_assert_eq!(a.concordant + a.discordant, judgments.len());
    }

    #[test]
    fn tied_metric_scores_count_against(n in 1..30usize) {
        let judgments: Vec<RelativeRankingJudgment> = (0..n)
            .map(|i| RelativeRankingJudgment {
                abstract_id: "x".into(),
                better_candidate_id: format!("b{i}"),
                worse_candidate_id: format!("w{i}"),
                score_diff: 0.5,
            })
            .collect();
        let flat: HashMap<String, f64> = judgments
            .iter()
            .flat_map(|j| [(j.better_candidate_id.clone(), 0.3), (j.worse_candidate_id.clone(), 0.3)])
            .collect();
        prop_assert_eq!(kendall_wmt_tau(&judgments, &flat).unwrap().tau, -1.0);
    }

    #[test]
    fn correlations_are_symmetric_and_affine_invariant(
        x in vec(-10.0..10.0f64, 3..50),
        noise in vec(-1.0..1.0f64, 50),
        a in 0.1..5.0f64,
        b in -3.0..3.0f64,
    ) {
        let y: Vec<f64> = x.iter().zip(&noise).map(|(v, e)| v + e).collect();
        let scaled: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let r = pearson(&x, &y).unwrap();
        prop_assert!((r - pearson(&y, &x).unwrap()).abs() < 1e-12);
        prop_assert!((r - pearson(&scaled, &y).unwrap()).abs() < 1e-9);
        let rho = spearman(&x, &y).unwrap();
        prop_assert!((-1.0..=1.0).contains(&rho));
        prop_assert!((rho - spearman(&scaled, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn kappa_is_symmetric_and_one_on_agreement(a in vec(0..3u8, 2..80), b in vec(0..3u8, 80)) {
        let b = &b[..a.len()];
        let ab = cohen_kappa(&a, b, &[0, 1, 2]);
        let ba = cohen_kappa(b, &a, &[0, 1, 2]);
        if let (Ok(x), Ok(y)) = (&ab, &ba) {
            prop_assert!((x - y).abs() < 1e-12);
            prop_assert!(*x <= 1.0 + 1e-12);
        }
        if a.iter().collect::<BTreeSet<_>>().len() > 1 {
            prop_assert!((cohen_kappa(&a, &a, &[0, 1, 2]).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ens_sum_is_monotone_in_the_sum(m in matrix(7, 30), i in 0..14u32, gap in 1..8u32) {
        let j = (i + gap).min(14);
        prop_assume!(i < j);
        let labels = ens_sum(&m, i, j).unwrap();
        let sums = m.sums();
        for a in 0..30 {
            for b in 0..30 {
                if sums[a] <= sums[b] {
                    prop_assert!(labels[a] <= labels[b]);
                }
            }
        }
    }

    #[test]
    fn unanimous_classifiers_decide(label in 0..3u8, k in 1..12usize) {
        let m = LabelMatrix::new(
            (0..k).map(|c| format!("c{c}")).collect(),
            vec!["t".into()],
            vec![vec![label]; k],
        )
        .unwrap();
        prop_assert_eq!(ens_mv(&m), vec![label]);
    }

    #[test]
    fn macro_f1_is_a_fraction(pred in vec(0..3u8, 1..60), gold in vec(0..3u8, 60)) {
        let gold = &gold[..pred.len()];
        for mode in [F1Mode::ThreeWay, F1Mode::Binary] {
            let f = macro_f1(&pred, gold, mode).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
        }
        let all = [0u8, 1, 2];
        let full: Vec<u8> = all.iter().chain(gold).copied().collect();
        prop_assert_eq!(macro_f1(&full, &full, F1Mode::ThreeWay).unwrap(), 1.0);
    }

    #[test]
    fn metric_splits_partition(n in 10..120usize, k in 1..6usize, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("id{i}")).collect();
        let sizes = SplitSizes::STANDARD.scaled_to(n).unwrap();
        let splits = make_metric_splits(&ids, k, sizes, seed).unwrap();
        prop_assert_eq!(splits.len(), k);
        for s in &splits {
            let all: BTreeSet<&String> = s.train.iter().chain(&s.dev).chain(&s.test).collect();
            prop_assert_eq!(all.len(), n);
            prop_assert_eq!(s.train.len() + s.dev.len() + s.test.len(), n);
        }
    }

    #[test]
    fn loss_is_non_negative(seed in any::<u64>(), v in vec(-1.0..1.0f64, 24), delta in 0.0..1.0f64) {
        let m = ProjectionModel::init(8, 6, 4, seed).unwrap();
        let cfg = LossConfig { margin: 0.1, lambda: 1.0, scale: 1.0 };
        let lv = loss(&m, &v[..8], &v[8..16], &v[16..], delta, &cfg).unwrap();
        prop_assert!(lv.loss >= 0.0 && lv.triplet >= 0.0 && lv.mse >= 0.0);
        prop_assert_eq!(lv.grad.len(), m.params.len());
    }

    #[test]
    fn any_log_prefix_replays_a_prefix(d in draws(), cut in any::<prop::sample::Index>()) {
        let c = campaign(4, 3);
        let mut log = JudgmentLog::in_memory();
        for s in selections(&d) {
            log.append(&c, Judgment::BestWorst(s), None).unwrap();
        }
        let bytes: Vec<u8> = log
            .entries()
            .iter()
            .flat_map(|e| {
                let mut line = serde_json::to_vec(e).unwrap();
                line.push(b'\n');
                line
            })
            .collect();
        let cut = cut.index(bytes.len() + 1);
        let parsed = parse_log(&bytes[..cut]).unwrap();
        prop_assert!(parsed.valid_len <= cut);
        prop_assert_eq!(&parsed.entries[..], &log.entries()[..parsed.entries.len()]);
        prop_assert_eq!(parsed.torn_tail, parsed.valid_len < cut);
    }
}
