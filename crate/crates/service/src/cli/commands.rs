use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::time::Duration;

use a2t_core::analysis::{overlap_report, AnalysisItem, EDIT_OVERLAP_DEFINITION};
use a2t_core::annotation::{
    cohen_kappa, create_campaign, export_csv, pairwise_rank_correlation, percentage_agreement, AssignmentPolicy,
    CampaignKind, CampaignOptions, ExportView, TaskInstance,
};
use a2t_core::corpus::{
    filter_corpus, load_corpus, make_constrained_split, write_jsonl, write_split, CorpusFormat, FilterConfig,
    SplitCounts, SplitSpec, Stopwords,
};
use a2t_core::humor::{
    align_gold, generation_control_metrics, macro_f1, parse_gold_csv, search_thresholds, ControlledGeneration,
    EnsembleMode, F1Mode, LabelMatrix,
};
use a2t_core::metric::{
    evaluate, make_metric_splits, train, EmbeddingStore, SplitSizes, TrainConfig, TrainedMetric,
};
use a2t_core::pseudo::{
    join_labels, keep_label_consistent, merge_pseudo, ngram_frequency_filter, parse_generations, recheck,
    write_generations, NgramFilterConfig, OriginalTitle,
};
use a2t_core::scoring::{
    average_rank, best_worst_distribution, bws_scores, parse_rr_jsonl, parse_scores_csv, system_bws,
    to_relative_ranking, write_rr_jsonl, write_scores_csv, RelativeRankingJudgment,
};
use a2t_core::stats::{
    correlation_csv, format_table, kendall_wmt_tau, multi_split_summary, pearson, spearman, system_level,
    Coefficient, CorrelationReport, Level, MetricTable, SystemScoreItem,
};
use serde::Deserialize;

use super::args::*;
use super::io::{
    bws_source, campaign_file, log_file, read_campaign, read_campaign_state, read_config, read_jsonl, read_text,
    write_text,
};
use super::Run;
use crate::config::ServiceConfig;
use crate::embed::EmbeddingClient;
use crate::manifest::sha256_hex;
use crate::{Result, ServiceError};

pub(super) fn dispatch(cmd: Command, run: &mut Run) -> Result<()> {
    match cmd {
        Command::Ingest(a) => ingest(a, run),
        Command::Filter(a) => filter(a, run),
        Command::Split(a) => split(a, run),
        Command::Campaign(CampaignCommand::Create(a)) => campaign_create(a, run),
        Command::Campaign(CampaignCommand::Assign(a)) => campaign_assign(a, run),
        Command::Campaign(CampaignCommand::Export(a)) => campaign_export(a, run),
        Command::ScoreBws(a) => score_bws(a, run),
        Command::RrConvert(a) => rr_convert(a, run),
        Command::TrainMetric(a) => train_metric(a, run),
        Command::EvalMetric(a) => eval_metric(a, run),
        Command::Ensemble(EnsembleCommand::Aggregate(a)) => ensemble_aggregate(a, run),
        Command::Ensemble(EnsembleCommand::Search(a)) => ensemble_search(a, run),
        Command::HumorMetrics(a) => humor_metrics(a, run),
        Command::Pseudo(PseudoCommand::Filter(a)) => pseudo_filter(a, run),
        Command::Pseudo(PseudoCommand::Merge(a)) => pseudo_merge(a, run),
        Command::Stats(s) => stats(s, run),
        Command::Analyze(a) => analyze(a, run),
        Command::Embed(a) => embed(a, run),
        Command::Serve(a) => serve(a, run),
        Command::Rerun(_) => unreachable!("handled before dispatch"),
    }
}

fn usage(msg: impl Into<String>) -> ServiceError {
    ServiceError::Usage(msg.into())
}

fn corpus_format(path: &Path, given: Option<&str>) -> Result<CorpusFormat> {
    match given {
        Some(f) => f.parse().map_err(usage),
        None if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => Ok(CorpusFormat::Csv),
        None => Ok(CorpusFormat::Jsonl),
    }
}

fn write_corpus(path: &Path, records: &[a2t_core::corpus::PaperRecord]) -> Result<()> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, records)?;
    write_text(path, std::str::from_utf8(&buf).expect("json is utf-8"))
}

fn ingest(a: IngestArgs, run: &mut Run) -> Result<()> {
    let format = corpus_format(&a.input, a.format.as_deref())?;
    run.input(&a.input)?;
    run.set("format", format!("{format:?}").to_lowercase());
    let records = load_corpus(&a.input, format)?;
    write_corpus(&a.out, &records)?;
    run.output(&a.out)?;
    let c = SplitCounts::of(&records);
    println!(
        "{} records ({} funny, {} not funny, {} nlp, {} ml)",
        c.total, c.funny, c.not_funny, c.nlp, c.ml
    );
    Ok(())
}

fn filter(a: FilterArgs, run: &mut Run) -> Result<()> {
    let mut cfg: FilterConfig = match &a.config {
        Some(p) => {
            run.input(p)?;
            read_config(p)?
        }
        None => FilterConfig::default(),
    };
    if let Some(w) = a.max_abstract_words {
        cfg.max_abstract_words = w;
    }
    if let Some(y) = a.min_year {
        cfg.min_year = y;
    }
    cfg.validate()?;
    run.set("filter", &cfg);
    run.input(&a.input)?;
    let records = load_corpus(&a.input, CorpusFormat::Jsonl)?;
    let kept = filter_corpus(&records, &cfg);
    write_corpus(&a.out, &kept)?;
    run.output(&a.out)?;
    println!("kept {} of {} records", kept.len(), records.len());
    Ok(())
}

fn split(a: SplitArgs, run: &mut Run) -> Result<()> {
    let mut spec: SplitSpec = match &a.spec {
        Some(p) => {
            run.input(p)?;
            read_config(p)?
        }
        None => SplitSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    run.set("split_spec", &spec);
    run.set("seed", spec.seed);
    run.input(&a.input)?;
    let records = load_corpus(&a.input, CorpusFormat::Jsonl)?;
    let split = make_constrained_split(&records, &spec)?;
    write_split(&a.out, &split, &spec)?;
    run.output(&a.out)?;
    for (name, part) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
        let c = SplitCounts::of(part);
        println!(
            "{name:5} {:6} records  funny {:5}  not funny {:5}  nlp {:5}  ml {:5}",
            c.total, c.funny, c.not_funny, c.nlp, c.ml
        );
    }
    Ok(())
}

fn policy(a: &AssignmentArgs, run: &mut Run) -> Result<Option<AssignmentPolicy>> {
    if let Some(p) = &a.assignment {
        run.input(p)?;
        let map: BTreeMap<String, Vec<String>> = read_config(p)?;
        return Ok(Some(AssignmentPolicy::Explicit(map)));
    }
    if a.annotators.is_empty() {
        return Ok(None);
    }
    Ok(Some(match a.per_instance {
        Some(k) => AssignmentPolicy::RoundRobin {
            annotators: a.annotators.clone(),
            per_instance: k,
        },
        None => AssignmentPolicy::All(a.annotators.clone()),
    }))
}

fn campaign_create(a: CampaignCreateArgs, run: &mut Run) -> Result<()> {
    let kind: CampaignKind = a.kind.parse().map_err(usage)?;
    crate::store::check_campaign_id(&a.id)?;
    run.input(&a.instances)?;
    let instances: Vec<TaskInstance> = read_jsonl(&a.instances)?;
    let policy = policy(&a.assignment, run)?;
    let options = CampaignOptions {
        min_annotators_per_instance: a.min_annotators,
        max_annotators_per_instance: a.max_annotators,
        seed: a.seed,
    };
    run.set("kind", kind);
    run.set("seed", a.seed);
    run.set("assignment", &policy);
    run.set("annotator_bounds", [a.min_annotators, a.max_annotators]);
    let campaign = create_campaign(&a.id, kind, instances, policy.as_ref(), options)?;
    let n = campaign.instances.len();
    let path = match (&a.data_dir, &a.out) {
        (Some(dir), _) => {
            let store = crate::store::CampaignStore::open(dir, 0)?;
            store.create(campaign)?;
            campaign_file(dir, &a.id)
        }
        (None, Some(out)) => {
            write_text(out, &serde_json::to_string_pretty(&campaign).expect("campaigns serialize"))?;
            out.clone()
        }
        (None, None) => unreachable!("clap requires one of the two"),
    };
    run.output(&path)?;
    println!("campaign {} ({kind}, {n} instances) -> {}", a.id, path.display());
    Ok(())
}

fn campaign_assign(a: CampaignAssignArgs, run: &mut Run) -> Result<()> {
    let (path, log) = match (&a.source.data_dir, &a.source.id, &a.source.campaign) {
        (Some(dir), Some(id), _) => {
            crate::store::check_campaign_id(id)?;
            (campaign_file(dir, id), Some(log_file(dir, id)))
        }
        (None, _, Some(p)) => (p.clone(), None),
        _ => return Err(usage("give --data-dir with --id, or --campaign")),
    };
    if let Some(log) = &log {
        if std::fs::metadata(log).is_ok_and(|m| m.len() > 0) {
            return Err(ServiceError::Data(format!(
                "{} already holds judgments; reassigning would orphan them",
                log.display()
            )));
        }
    }
    let policy = policy(&a.assignment, run)?.ok_or_else(|| usage("no assignment given"))?;
    run.input(&path)?;
    run.set("assignment", &policy);
    let mut campaign = read_campaign(&path)?;
    campaign.assign(&policy)?;
    let json = serde_json::to_string_pretty(&campaign).expect("campaigns serialize");
    crate::store::write_atomic(&path, json.as_bytes())?;
    run.output(&path)?;
    println!("{} annotators assigned", campaign.annotators().len());
    Ok(())
}

fn campaign_export(a: CampaignExportArgs, run: &mut Run) -> Result<()> {
    let view: ExportView = a.view.parse().map_err(usage)?;
    run.set("view", view);
    let (campaign, state) = read_campaign_state(run, &a.data_dir, &a.id)?;
    write_text(&a.out, &export_csv(&campaign, &state, view)?)?;
    run.output(&a.out)?;
    println!("{} judgments exported", state.len());
    Ok(())
}

fn score_bws(a: ScoreBwsArgs, run: &mut Run) -> Result<()> {
    let (campaign, selections) = bws_source(run, &a.source, a.export.as_deref())?;
    run.set("formula", "(n_best - n_worst) / n_annotators_who_judged");
    run.set("min_annotators_per_instance", campaign.min_annotators_per_instance);
    let scoring = bws_scores(&campaign, &selections)?;
    for e in &scoring.excluded {
        log::warn!(
            "instance {} excluded: {} of {} required annotators",
            e.instance_id,
            e.annotators,
            e.required
        );
    }
    write_text(&a.out, &write_scores_csv(&scoring.scores)?)?;
    run.output(&a.out)?;
    let mut systems: Vec<(String, f64)> = system_bws(&scoring.scores).into_iter().collect();
    systems.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    let rows: Vec<Vec<String>> = systems.iter().map(|(s, v)| vec![s.clone(), format!("{v:.3}")]).collect();
    print!("{}", format_table(&["system".to_string(), "BWS".to_string()], &rows));
    println!(
        "{} candidates scored, {} instances excluded",
        scoring.scores.len(),
        scoring.excluded.len()
    );
    Ok(())
}

fn read_rr(path: &Path, run: &mut Run) -> Result<Vec<RelativeRankingJudgment>> {
    run.input(path)?;
    let file = File::open(path).map_err(ServiceError::file(path))?;
    Ok(parse_rr_jsonl(BufReader::new(file))?)
}

fn rr_convert(a: RrConvertArgs, run: &mut Run) -> Result<()> {
    run.input(&a.scores)?;
    let scores = parse_scores_csv(&read_text(&a.scores)?)?;
    let rr = to_relative_ranking(&scores);
    write_text(&a.out, &write_rr_jsonl(&rr))?;
    run.output(&a.out)?;
    println!("{} judgments", rr.len());
    Ok(())
}

fn train_config(a: &TrainMetricArgs, run: &mut Run) -> Result<TrainConfig> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => {
            run.input(p)?;
            read_config(p)?
        }
        None => TrainConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    cfg.validate()?;
    run.set("train_config", &cfg);
    run.set("seed", cfg.seed);
    Ok(cfg)
}

fn load_store(path: &Path, run: &mut Run) -> Result<EmbeddingStore> {
    run.input(path)?;
    Ok(EmbeddingStore::load(path)?)
}

fn subset(rr: &[RelativeRankingJudgment], ids: &[String]) -> Vec<RelativeRankingJudgment> {
    let keep: HashSet<&str> = ids.iter().map(String::as_str).collect();
    rr.iter().filter(|j| keep.contains(j.abstract_id.as_str())).cloned().collect()
}

fn train_metric(a: TrainMetricArgs, run: &mut Run) -> Result<()> {
    let cfg = train_config(&a, run)?;
    let all = read_rr(&a.train, run)?;
    let store = load_store(&a.embeddings, run)?;
    let Some(n_splits) = a.splits else {
        let dev = match &a.dev {
            Some(p) => read_rr(p, run)?,
            None => Vec::new(),
        };
        let m = train(&all, &dev, &store, &cfg)?;
        m.save(&a.out)?;
        run.output(&a.out)?;
        print_training(&m);
        return Ok(());
    };
    let sizes = SplitSizes {
        train: a.sizes[0],
        dev: a.sizes[1],
        test: a.sizes[2],
    };
    let ids: Vec<String> = all
        .iter()
        .map(|j| j.abstract_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    run.set("splits", n_splits);
    run.set("split_sizes", sizes.scaled_to(ids.len())?);
    let splits = make_metric_splits(&ids, n_splits, sizes, cfg.seed)?;
    let mut taus = Vec::new();
    let mut n_test = 0;
    for (k, s) in splits.iter().enumerate() {
        let (tr, dev, test) = (subset(&all, &s.train), subset(&all, &s.dev), subset(&all, &s.test));
        let m = train(&tr, &dev, &store, &cfg)?;
        let tau = evaluate(&m.model, &test, &store)?;
        let dir = a.out.join(format!("split-{k}"));
        std::fs::create_dir_all(&dir).map_err(ServiceError::file(&dir))?;
        m.save(&dir.join("metric.json"))?;
        write_text(&dir.join("split.json"), &serde_json::to_string_pretty(s).expect("ids serialize"))?;
        println!(
            "split {k}: best epoch {} dev tau {} test tau {:.3} ({} judgments)",
            m.report.best_epoch,
            m.report.best_dev_tau.map_or("-".into(), |t| format!("{t:.3}")),
            tau.tau,
            test.len()
        );
        taus.push(tau.tau);
        n_test += test.len();
    }
    let report = CorrelationReport::from_splits("A2TMetric", Level::Segment, Coefficient::KendallWmt, taus, n_test)?;
    write_text(&a.out.join("summary.csv"), &correlation_csv(std::slice::from_ref(&report))?)?;
    run.output(&a.out)?;
    println!("segment-level tau over {n_splits} splits: {}", report.display_value());
    Ok(())
}

fn print_training(m: &TrainedMetric) {
    let r = &m.report;
    for e in &r.epochs {
        log::info!(
            "epoch {:3} loss {:.5} order violations {} margin violations {} dev tau {}",
            e.epoch,
            e.train_loss,
            e.order_violations,
            e.margin_violations,
            e.dev_tau.map_or("-".into(), |t| format!("{t:.4}"))
        );
    }
    if let Some(d) = r.diverged_at {
        eprintln!("warning: training diverged in epoch {d}; kept epoch {}", r.best_epoch);
    }
    println!(
        "best epoch {} of {}; dev tau {}{}",
        r.best_epoch,
        r.epochs.len() - 1,
        r.best_dev_tau.map_or("-".into(), |t| format!("{t:.4}")),
        if r.stopped_early { " (stopped early)" } else { "" }
    );
}

#[derive(serde::Serialize)]
struct EvalReport {
    tau: f64,
    concordant: usize,
    discordant: usize,
    judgments: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    system_level: Option<a2t_core::stats::SystemLevelReport>,
}

fn eval_metric(a: EvalMetricArgs, run: &mut Run) -> Result<()> {
    run.input(&a.metric)?;
    let metric = TrainedMetric::load(&a.metric)?;
    let rr = read_rr(&a.rr, run)?;
    let store = load_store(&a.embeddings, run)?;
    run.set("tau_variant", "wmt: (concordant - discordant) / (concordant + discordant), metric ties discordant");
    let scores = a2t_core::metric::candidate_scores(&metric.model, &rr, &store)?;
    let tau = kendall_wmt_tau(&rr, &scores)?;
    println!(
        "segment-level tau {:.4} ({} concordant, {} discordant, {} judgments)",
        tau.tau,
        tau.concordant,
        tau.discordant,
        rr.len()
    );
    let system = match &a.scores {
        Some(p) => {
            run.input(p)?;
            let held_out: HashSet<&str> = rr.iter().map(|j| j.abstract_id.as_str()).collect();
            let mut items = Vec::new();
            for s in parse_scores_csv(&read_text(p)?)? {
                if held_out.contains(s.abstract_id.as_str()) {
                    items.push(SystemScoreItem {
                        metric: metric.score_ids(&store, &s.abstract_id, &s.candidate_id)?,
                        system: s.system,
                        human: s.score,
                    });
                }
            }
            let rep = system_level(&items);
            let rows: Vec<Vec<String>> = rep
                .systems
                .iter()
                .map(|s| vec![s.system.clone(), s.n.to_string(), format!("{:.3}", s.human), format!("{:.3}", s.metric)])
                .collect();
            print!("{}", format_table(&["system", "n", "human", "metric"].map(String::from), &rows));
            let show = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.3}"));
            println!("system-level pearson {} spearman {}", show(rep.pearson), show(rep.spearman));
            Some(rep)
        }
        None => None,
    };
    if let Some(out) = &a.out {
        let rep = EvalReport {
            tau: tau.tau,
            concordant: tau.concordant,
            discordant: tau.discordant,
            judgments: rr.len(),
            system_level: system,
        };
        write_text(out, &(serde_json::to_string_pretty(&rep).expect("report serializes") + "\n"))?;
        run.output(out)?;
    }
    Ok(())
}

fn load_matrix(path: &Path, run: &mut Run) -> Result<LabelMatrix> {
    run.input(path)?;
    Ok(LabelMatrix::parse_csv(File::open(path).map_err(ServiceError::file(path))?)?)
}

fn load_labels(path: &Path, run: &mut Run) -> Result<BTreeMap<String, u8>> {
    run.input(path)?;
    Ok(parse_gold_csv(File::open(path).map_err(ServiceError::file(path))?)?)
}

fn labels_csv(ids: &[String], labels: &[u8]) -> String {
    let mut out = String::from("title_id,label\n");
    for (id, l) in ids.iter().zip(labels) {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([id.as_str(), &l.to_string()]).expect("in-memory write");
        out.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory")).expect("utf-8"));
    }
    out
}

fn ensemble_aggregate(a: EnsembleAggregateArgs, run: &mut Run) -> Result<()> {
    let mode = match a.mode.as_str() {
        "mv" => EnsembleMode::Mv,
        "sum" => EnsembleMode::Sum {
            i: a.i.expect("clap requires --i"),
            j: a.j.expect("clap requires --j"),
        },
        other => return Err(usage(format!("unknown ensemble mode {other:?}; use mv or sum"))),
    };
    run.set("ensemble", mode);
    let m = load_matrix(&a.labels, run)?;
    let labels = mode.apply(&m)?;
    write_text(&a.out, &labels_csv(m.title_ids(), &labels))?;
    run.output(&a.out)?;
    let count = |c: u8| labels.iter().filter(|&&l| l == c).count();
    println!(
        "{} titles: {} not funny, {} medium, {} funny",
        labels.len(),
        count(0),
        count(1),
        count(2)
    );
    Ok(())
}

fn ensemble_search(a: EnsembleSearchArgs, run: &mut Run) -> Result<()> {
    let mode: F1Mode = a.f1.parse().map_err(usage)?;
    run.set("f1", mode);
    run.set("grid", "0 <= i < j <= 2K, ties to smaller i then j");
    let m = load_matrix(&a.labels, run)?;
    let gold = align_gold(&m, &load_labels(&a.gold, run)?)?;
    let best = search_thresholds(&m, &gold, mode)?;
    println!("best i={} j={} macro_f1={:.4}", best.i, best.j, best.score);
    if best.degenerate {
        eprintln!("warning: gold labels have a single class; the optimum is not informative");
    }
    if let Some(out) = &a.out {
        write_text(out, &(serde_json::to_string_pretty(&best).expect("serializes") + "\n"))?;
        run.output(out)?;
    }
    Ok(())
}

fn humor_metrics(a: HumorMetricsArgs, run: &mut Run) -> Result<()> {
    let json = if let Some(g) = &a.generations {
        run.input(g)?;
        let gens: Vec<ControlledGeneration> = read_jsonl(g)?;
        let rep = generation_control_metrics(&gens)?;
        if !rep.missing_variant.is_empty() {
            eprintln!("warning: {} abstracts lack one constraint variant", rep.missing_variant.len());
        }
        print!("{rep}");
        serde_json::to_string_pretty(&rep)
    } else {
        let mode: F1Mode = a.f1.parse().map_err(usage)?;
        run.set("f1", mode);
        let pred = load_labels(a.pred.as_deref().expect("clap enforces"), run)?;
        let gold = load_labels(a.gold.as_deref().expect("clap requires gold with pred"), run)?;
        let mut p = Vec::new();
        let mut g = Vec::new();
        for (id, label) in &gold {
            let pl = pred.get(id).ok_or_else(|| a2t_core::Error::Unknown {
                what: "prediction for title",
                id: id.clone(),
            })?;
            p.push(*pl);
            g.push(*label);
        }
        let f1 = macro_f1(&p, &g, mode)?;
        println!("macro_f1={f1:.4} ({} titles)", g.len());
        serde_json::to_string_pretty(&serde_json::json!({ "macro_f1": f1, "titles": g.len(), "mode": mode }))
    }
    .expect("reports serialize");
    if let Some(out) = &a.out {
        write_text(out, &(json + "\n"))?;
        run.output(out)?;
    }
    Ok(())
}

fn pseudo_filter(a: PseudoFilterArgs, run: &mut Run) -> Result<()> {
    let mut cfg: NgramFilterConfig = match &a.config {
        Some(p) => {
            run.input(p)?;
            read_config(p)?
        }
        None => NgramFilterConfig::default(),
    };
    if let Some(f) = a.max_frequency {
        cfg.max_corpus_frequency = Some(f);
    }
    if a.no_frequency_limit {
        cfg.max_corpus_frequency = None;
    }
    cfg.validate()?;
    run.set("ngram_filter", &cfg);
    run.set("ngram_frequency", "number of titles in scope containing the n-gram");
    run.input(&a.generations)?;
    let file = File::open(&a.generations).map_err(ServiceError::file(&a.generations))?;
    let mut titles = parse_generations(BufReader::new(file))?;
    if let Some(l) = &a.labels {
        run.input(l)?;
        join_labels(&mut titles, File::open(l).map_err(ServiceError::file(l))?)?;
    }
    let consistent = keep_label_consistent(&titles);
    let result = ngram_frequency_filter(&consistent, &cfg)?;
    let left = recheck(&result.kept, &cfg);
    if let Some((gram, n)) = left.first() {
        return Err(ServiceError::Data(format!("filter left {gram:?} in {n} titles")));
    }
    write_text(&a.out, &write_generations(&result.kept))?;
    run.output(&a.out)?;
    if let Some(r) = &a.removed {
        let lines: String = result
            .removed
            .iter()
            .map(|x| serde_json::to_string(x).expect("serializes") + "\n")
            .collect();
        write_text(r, &lines)?;
        run.output(r)?;
    }
    println!(
        "{} generations, {} label-consistent, {} removed for frequent n-grams, {} kept",
        titles.len(),
        consistent.len(),
        result.removed.len(),
        result.kept.len()
    );
    Ok(())
}

fn pseudo_merge(a: PseudoMergeArgs, run: &mut Run) -> Result<()> {
    run.input(&a.originals)?;
    run.input(&a.pseudo)?;
    let originals: Vec<OriginalTitle> = load_corpus(&a.originals, CorpusFormat::Jsonl)?
        .iter()
        .filter_map(OriginalTitle::from_record)
        .collect();
    let file = File::open(&a.pseudo).map_err(ServiceError::file(&a.pseudo))?;
    let pseudo = parse_generations(BufReader::new(file))?;
    let merged = merge_pseudo(&originals, &pseudo)?;
    write_text(&a.out, &merged.to_jsonl())?;
    run.output(&a.out)?;
    println!("{merged}");
    if merged.excluded_abstracts > 0 {
        println!("{} abstracts without an opposite-label pseudo title", merged.excluded_abstracts);
    }
    Ok(())
}

fn stats(cmd: StatsCommand, run: &mut Run) -> Result<()> {
    match cmd {
        StatsCommand::Table(a) => {
            run.input(&a.input)?;
            let mut t = MetricTable::from_csv(&read_text(&a.input)?)?;
            if let Some(col) = &a.sort {
                t.sort_by_column(col, !a.ascending)?;
            }
            print!("{}", t.render_text(a.decimals));
            if let Some(out) = &a.out {
                write_text(out, &t.to_csv(a.decimals)?)?;
                run.output(out)?;
            }
        }
        StatsCommand::Summary(a) => {
            #[derive(Deserialize)]
            struct Row {
                metric: String,
                #[allow(dead_code)]
                split: String,
                value: f64,
            }
            run.input(&a.input)?;
            let text = read_text(&a.input)?;
            let mut order: Vec<String> = Vec::new();
            let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for row in csv::Reader::from_reader(text.as_bytes()).deserialize::<Row>() {
                let r = row.map_err(a2t_core::Error::from)?;
                if !values.contains_key(&r.metric) {
                    order.push(r.metric.clone());
                }
                values.entry(r.metric).or_default().push(r.value);
            }
            run.set("std", "sample (n - 1)");
            let mut rows = Vec::new();
            let mut csv_out = String::from("metric,n,mean,std,display\n");
            for m in &order {
                let s = multi_split_summary(&values[m])?;
                let shown = s.format(a.mean_decimals, a.std_decimals);
                csv_out.push_str(&format!("{m},{},{:?},{:?},{shown}\n", s.n, s.mean, s.std));
                rows.push(vec![m.clone(), s.n.to_string(), shown]);
            }
            print!("{}", format_table(&["metric", "splits", "mean±std"].map(String::from), &rows));
            if let Some(out) = &a.out {
                write_text(out, &csv_out)?;
                run.output(out)?;
            }
        }
        StatsCommand::Correlate(a) => {
            run.input(&a.input)?;
            let text = read_text(&a.input)?;
            let x = numeric_column(&text, &a.x)?;
            let y = numeric_column(&text, &a.y)?;
            println!("pearson {:.4}", pearson(&x, &y)?);
            println!("spearman {:.4}", spearman(&x, &y)?);
        }
        StatsCommand::Kappa(a) => {
            run.input(&a.input)?;
            let text = read_text(&a.input)?;
            let x = column(&text, &a.a)?;
            let y = column(&text, &a.b)?;
            let cats: Vec<String> = x.iter().chain(&y).cloned().collect::<BTreeSet<_>>().into_iter().collect();
            println!("kappa {:.4} ({} items)", cohen_kappa(&x, &y, &cats)?, x.len());
        }
        StatsCommand::Agreement(a) => {
            match (&a.source.data_dir, &a.source.id) {
                (Some(dir), Some(id)) => {
                    let (c, state) = read_campaign_state(run, dir, id)?;
                    match c.kind {
                        CampaignKind::BestWorst => print_bws_agreement(&state.bws_selections()),
                        CampaignKind::Ranking => {
                            let rep = pairwise_rank_correlation(&state.rankings(), &a.criterion);
                            for p in &rep.pairs {
                                println!(
                                    "{} / {}: {:.3} over {} instances",
                                    p.annotator_a, p.annotator_b, p.mean_spearman, p.instances
                                );
                            }
                            if !rep.skipped.is_empty() {
                                println!("{} instance pairs skipped (constant ranking)", rep.skipped.len());
                            }
                            println!("mean spearman ({}): {}", rep.criterion, opt3(rep.mean));
                        }
                        CampaignKind::Pairwise => {
                            return Err(ServiceError::Data("agreement is defined for best-worst and ranking campaigns".into()))
                        }
                    }
                }
                _ => {
                    let (_, selections) = bws_source(run, &a.source, a.export.as_deref())?;
                    print_bws_agreement(&selections);
                }
            }
            run.set("agreement", "(|best_a ∩ best_b| + |worst_a ∩ worst_b|) / 4, mean per pair then over pairs");
        }
        StatsCommand::Distribution(a) => {
            let (c, selections) = bws_source(run, &a.source, a.export.as_deref())?;
            print!("{}", best_worst_distribution(&c, &selections)?.render_text());
        }
        StatsCommand::AverageRank(a) => {
            let (c, state) = read_campaign_state(run, &a.data_dir, &a.id)?;
            let groups = match &a.groups {
                Some(p) => {
                    #[derive(Deserialize)]
                    struct Row {
                        instance_id: String,
                        group: String,
                    }
                    run.input(p)?;
                    let text = read_text(p)?;
                    let mut m = BTreeMap::new();
                    for row in csv::Reader::from_reader(text.as_bytes()).deserialize::<Row>() {
                        let r = row.map_err(a2t_core::Error::from)?;
                        m.insert(r.instance_id, r.group);
                    }
                    m
                }
                None => BTreeMap::new(),
            };
            let table = average_rank(&c, &state.rankings(), &groups)?;
            print!("{}", table.render_text());
            if !table.omitted.is_empty() {
                println!("unranked systems: {}", table.omitted.join(", "));
            }
            if let Some(out) = &a.out {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["group", "criterion", "system", "mean_rank", "n"]).map_err(a2t_core::Error::from)?;
                for cell in &table.cells {
                    w.write_record([
                        cell.group.clone(),
                        cell.criterion.clone(),
                        cell.system.clone(),
                        format!("{:?}", cell.mean_rank),
                        cell.n.to_string(),
                    ])
                    .map_err(a2t_core::Error::from)?;
                }
                let bytes = w.into_inner().map_err(|e| ServiceError::Io(e.into_error()))?;
                write_text(out, std::str::from_utf8(&bytes).expect("utf-8"))?;
                run.output(out)?;
            }
        }
    }
    Ok(())
}

fn opt3(v: Option<f64>) -> String {
    v.map_or("undefined".into(), |x| format!("{x:.3}"))
}

fn print_bws_agreement(selections: &[a2t_core::annotation::BwsSelection]) {
    let rep = percentage_agreement(selections);
    for p in &rep.pairs {
        println!(
            "{} / {}: {:.1}% over {} instances",
            p.annotator_a,
            p.annotator_b,
            100.0 * p.agreement,
            p.shared_instances
        );
    }
    println!("mean agreement: {}", rep.mean.map_or("undefined".into(), |m| format!("{:.1}%", 100.0 * m)));
}

fn column(text: &str, name: &str) -> Result<Vec<String>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(a2t_core::Error::from)?.clone();
    let idx = headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| usage(format!("no column {name:?}")))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(a2t_core::Error::from)?;
        out.push(rec.get(idx).unwrap_or_default().to_string());
    }
    Ok(out)
}

fn numeric_column(text: &str, name: &str) -> Result<Vec<f64>> {
    column(text, name)?
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.trim().parse::<f64>().map_err(|_| {
                a2t_core::Error::Parse {
                    line: i + 2,
                    message: format!("column {name:?}: {v:?} is not a number"),
                }
                .into()
            })
        })
        .collect()
}

fn analyze(a: AnalyzeArgs, run: &mut Run) -> Result<()> {
    run.input(&a.input)?;
    let stopwords = match &a.stopwords {
        Some(p) => {
            run.input(p)?;
            let text = read_text(p)?;
            let version = format!("file-sha256:{}", &sha256_hex(text.as_bytes())[..16]);
            Stopwords::parse(&version, &text)
        }
        None => Stopwords::builtin(),
    };
    run.set("stopwords_version", stopwords.version());
    run.set("edit_overlap", EDIT_OVERLAP_DEFINITION);
    let items: Vec<AnalysisItem> = read_jsonl(&a.input)?;
    let rep = overlap_report(&items, &stopwords)?;
    let text = match a.format.as_str() {
        "md" | "markdown" => rep.to_markdown(),
        "csv" => rep.to_csv()?,
        other => return Err(usage(format!("unknown format {other:?}; use md or csv"))),
    };
    match &a.out {
        Some(out) => {
            write_text(out, &text)?;
            run.output(out)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn embed(a: EmbedArgs, run: &mut Run) -> Result<()> {
    #[derive(Deserialize)]
    struct Item {
        id: String,
        text: String,
    }
    run.input(&a.input)?;
    run.set("provider_url", &a.url);
    let items: Vec<Item> = read_jsonl(&a.input)?;
    let client = EmbeddingClient::new(&a.url, a.cache.clone(), a.batch_size, Duration::from_secs(a.timeout_secs));
    let texts: Vec<String> = items.iter().map(|i| i.text.clone()).collect();
    let vectors = client.embed(&texts)?;
    let dim = vectors.first().map_or(0, Vec::len);
    let mut store = EmbeddingStore::new(dim)?;
    for (item, v) in items.into_iter().zip(vectors) {
        store.insert(item.id, v)?;
    }
    let mut buf = Vec::new();
    store.write(&mut buf)?;
    write_text(&a.out, std::str::from_utf8(&buf).expect("json is utf-8"))?;
    run.output(&a.out)?;
    println!("{} vectors of dimension {dim}", store.len());
    Ok(())
}

fn serve(a: ServeArgs, run: &mut Run) -> Result<()> {
    let cfg = ServiceConfig::load(a.config.as_deref())?;
    if let Some(p) = &a.config {
        run.input(p)?;
    }
    let mut shown = cfg.clone();
    shown.auth.access_codes.values_mut().for_each(|c| *c = "<redacted>".into());
    if shown.auth.admin_token.is_some() {
        shown.auth.admin_token = Some("<redacted>".into());
    }
    run.set("service", &shown);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let (listener, state) = crate::api::bind(&cfg).await?;
        let path = cfg.data_dir.join("serve.manifest.json");
        run.fallback_location(path.clone());
        run.manifest.write(&path)?;
        crate::api::serve(listener, state).await
    })
}
