use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "a2t", version, about = "Evaluation toolkit for abstract-to-title generation")]
pub struct Cli {
    /// Run manifest path (default: next to the main output)
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,

    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a JSONL or CSV corpus and write it as JSONL
    Ingest(IngestArgs),
    /// Drop records by abstract length, year and venue
    Filter(FilterArgs),
    /// Constrained train/dev/test split
    Split(SplitArgs),
    /// Create, assign and export annotation campaigns
    #[command(subcommand)]
    Campaign(CampaignCommand),
    /// Best-worst scores per candidate from a campaign
    ScoreBws(ScoreBwsArgs),
    /// Relative-ranking pairs from BWS scores
    RrConvert(RrConvertArgs),
    /// Train the reference-free metric
    TrainMetric(TrainMetricArgs),
    /// Segment- and system-level correlation of a trained metric
    EvalMetric(EvalMetricArgs),
    /// Classifier ensembles over a label matrix
    #[command(subcommand)]
    Ensemble(EnsembleCommand),
    /// Macro F1 of predictions, or humor-control metrics of generations
    HumorMetrics(HumorMetricsArgs),
    /// Pseudo-title filtering and merging
    #[command(subcommand)]
    Pseudo(PseudoCommand),
    /// Report tables, correlations and agreement
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Lexical and edit overlap between titles and abstracts
    Analyze(AnalyzeArgs),
    /// Fetch sentence embeddings from a provider into an embedding store
    Embed(EmbedArgs),
    /// Run the annotation HTTP service
    Serve(ServeArgs),
    /// Re-execute the command recorded in a manifest and verify its outputs
    Rerun(RerunArgs),
}

impl Command {
    pub fn name(&self) -> String {
        let sub = match self {
            Command::Campaign(c) => match c {
                CampaignCommand::Create(_) => "campaign create",
                CampaignCommand::Assign(_) => "campaign assign",
                CampaignCommand::Export(_) => "campaign export",
            },
            Command::Ensemble(EnsembleCommand::Aggregate(_)) => "ensemble aggregate",
            Command::Ensemble(EnsembleCommand::Search(_)) => "ensemble search",
            Command::Pseudo(PseudoCommand::Filter(_)) => "pseudo filter",
            Command::Pseudo(PseudoCommand::Merge(_)) => "pseudo merge",
            Command::Stats(s) => match s {
                StatsCommand::Table(_) => "stats table",
                StatsCommand::Summary(_) => "stats summary",
                StatsCommand::Correlate(_) => "stats correlate",
                StatsCommand::Kappa(_) => "stats kappa",
                StatsCommand::Agreement(_) => "stats agreement",
                StatsCommand::Distribution(_) => "stats distribution",
                StatsCommand::AverageRank(_) => "stats average-rank",
            },
            Command::Ingest(_) => "ingest",
            Command::Filter(_) => "filter",
            Command::Split(_) => "split",
            Command::ScoreBws(_) => "score-bws",
            Command::RrConvert(_) => "rr-convert",
            Command::TrainMetric(_) => "train-metric",
            Command::EvalMetric(_) => "eval-metric",
            Command::HumorMetrics(_) => "humor-metrics",
            Command::Analyze(_) => "analyze",
            Command::Embed(_) => "embed",
            Command::Serve(_) => "serve",
            Command::Rerun(_) => "rerun",
        };
        sub.to_string()
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// jsonl or csv; inferred from the extension when omitted
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// JSON or TOML filter configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub max_abstract_words: Option<usize>,
    #[arg(long)]
    pub min_year: Option<i32>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// JSON or TOML split specification
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides the seed in the specification
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum CampaignCommand {
    /// Build a campaign from a JSONL file of task instances
    Create(CampaignCreateArgs),
    /// Replace a campaign's assignments (only before any judgment exists)
    Assign(CampaignAssignArgs),
    /// Export effective judgments as CSV
    Export(CampaignExportArgs),
}

#[derive(Debug, Args)]
pub struct AssignmentArgs {
    /// Comma-separated annotator ids
    #[arg(long, value_delimiter = ',')]
    pub annotators: Vec<String>,
    /// Annotators per instance (round robin); all annotators when omitted
    #[arg(long)]
    pub per_instance: Option<usize>,
    /// JSON map of instance id to annotator ids
    #[arg(long, conflicts_with_all = ["annotators", "per_instance"])]
    pub assignment: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CampaignCreateArgs {
    #[arg(long)]
    pub id: String,
    /// best_worst, ranking or pairwise
    #[arg(long)]
    pub kind: String,
    /// JSONL, one task instance per line
    #[arg(long)]
    pub instances: PathBuf,
    #[command(flatten)]
    pub assignment: AssignmentArgs,
    #[arg(long, default_value_t = 2)]
    pub min_annotators: usize,
    #[arg(long, default_value_t = 5)]
    pub max_annotators: usize,
    /// Seed for presentation orders
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Service data directory to create the campaign in
    #[arg(long, required_unless_present = "out", conflicts_with = "out")]
    pub data_dir: Option<PathBuf>,
    /// Standalone campaign JSON file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CampaignSource {
    /// Service data directory
    #[arg(long, requires = "id", conflicts_with = "campaign")]
    pub data_dir: Option<PathBuf>,
    /// Campaign id inside the data directory
    #[arg(long)]
    pub id: Option<String>,
    /// Standalone campaign JSON file
    #[arg(long, required_unless_present = "data_dir")]
    pub campaign: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CampaignAssignArgs {
    #[command(flatten)]
    pub source: CampaignSource,
    #[command(flatten)]
    pub assignment: AssignmentArgs,
}

#[derive(Debug, Args)]
pub struct CampaignExportArgs {
    #[arg(long)]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub id: String,
    /// annotator (no system tags) or analysis
    #[arg(long, default_value = "analysis")]
    pub view: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreBwsArgs {
    #[command(flatten)]
    pub source: CampaignSource,
    /// Exported judgments CSV (with --campaign); read from the data directory otherwise
    #[arg(long, requires = "campaign")]
    pub export: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RrConvertArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainMetricArgs {
    /// Training judgments (RR JSONL); with --splits, the full judgment set
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long, conflicts_with = "splits")]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// JSON or TOML training configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Run the multi-split protocol over abstracts: train, select on dev, test
    #[arg(long)]
    pub splits: Option<usize>,
    /// train,dev,test sizes for --splits, scaled to the number of abstracts
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [170, 25, 35])]
    pub sizes: Vec<usize>,
    /// Metric JSON, or a directory with --splits
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalMetricArgs {
    #[arg(long)]
    pub metric: PathBuf,
    /// Held-out judgments (RR JSONL)
    #[arg(long)]
    pub rr: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// BWS scores CSV for system-level correlation
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// JSON report
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum EnsembleCommand {
    /// Aggregate classifier labels per title
    Aggregate(EnsembleAggregateArgs),
    /// Grid-search the EnsSUM thresholds against gold labels
    Search(EnsembleSearchArgs),
}

#[derive(Debug, Args)]
pub struct EnsembleAggregateArgs {
    /// Label matrix CSV: classifier id column, then one column per title
    #[arg(long)]
    pub labels: PathBuf,
    /// mv or sum
    #[arg(long, default_value = "mv")]
    pub mode: String,
    #[arg(long, required_if_eq("mode", "sum"))]
    pub i: Option<u32>,
    #[arg(long, required_if_eq("mode", "sum"))]
    pub j: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnsembleSearchArgs {
    #[arg(long)]
    pub labels: PathBuf,
    /// Gold CSV with title_id,label
    #[arg(long)]
    pub gold: PathBuf,
    /// three-way or binary
    #[arg(long, default_value = "three-way")]
    pub f1: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HumorMetricsArgs {
    /// Predicted labels CSV with title_id,label
    #[arg(long, requires = "gold", conflicts_with = "generations")]
    pub pred: Option<PathBuf>,
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long, default_value = "three-way")]
    pub f1: String,
    /// Controlled generations JSONL (abstract_id, constraint_funny, text, assigned_funny)
    #[arg(long, required_unless_present = "pred")]
    pub generations: Option<PathBuf>,
    /// JSON report
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PseudoCommand {
    /// Keep label-consistent generations and drop over-frequent n-grams
    Filter(PseudoFilterArgs),
    /// Pair each original title with an opposite-label pseudo title
    Merge(PseudoMergeArgs),
}

#[derive(Debug, Args)]
pub struct PseudoFilterArgs {
    #[arg(long)]
    pub generations: PathBuf,
    /// Classifier labels CSV with id,label
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// JSON or TOML n-gram filter configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with = "no_frequency_limit")]
    pub max_frequency: Option<usize>,
    #[arg(long)]
    pub no_frequency_limit: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Removed titles with their offending n-grams (JSONL)
    #[arg(long)]
    pub removed: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PseudoMergeArgs {
    /// Corpus JSONL with the original titles
    #[arg(long)]
    pub originals: PathBuf,
    /// Filtered pseudo titles JSONL
    #[arg(long)]
    pub pseudo: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Render a per-system metric table, optionally sorted by a column
    Table(StatsTableArgs),
    /// mean±std per metric over splits (long CSV: metric,split,value)
    Summary(StatsSummaryArgs),
    /// Pearson and Spearman between two CSV columns
    Correlate(StatsCorrelateArgs),
    /// Cohen's kappa between two CSV label columns
    Kappa(StatsKappaArgs),
    /// Inter-annotator agreement of a campaign
    Agreement(StatsCampaignArgs),
    /// Share of best and worst picks per system
    Distribution(StatsCampaignArgs),
    /// Mean rank per system and criterion
    AverageRank(StatsAverageRankArgs),
}

#[derive(Debug, Args)]
pub struct StatsTableArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub sort: Option<String>,
    #[arg(long)]
    pub ascending: bool,
    #[arg(long, default_value_t = 3)]
    pub decimals: usize,
    /// CSV output
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsSummaryArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub mean_decimals: usize,
    #[arg(long, default_value_t = 2)]
    pub std_decimals: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsCorrelateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: String,
}

#[derive(Debug, Args)]
pub struct StatsKappaArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
}

#[derive(Debug, Args)]
pub struct StatsCampaignArgs {
    #[command(flatten)]
    pub source: CampaignSource,
    /// Exported judgments CSV (with --campaign)
    #[arg(long, requires = "campaign")]
    pub export: Option<PathBuf>,
    /// Ranking criterion
    #[arg(long, default_value = "quality")]
    pub criterion: String,
}

#[derive(Debug, Args)]
pub struct StatsAverageRankArgs {
    #[arg(long)]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub id: String,
    /// CSV with instance_id,group
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// JSONL with system, title, abstract
    #[arg(long)]
    pub input: PathBuf,
    /// Stopword list, one word per line
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// md or csv
    #[arg(long, default_value = "md")]
    pub format: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// JSONL with id, text
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub url: String,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 60)]
    pub timeout_secs: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TOML service configuration
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    pub manifest: PathBuf,
}
