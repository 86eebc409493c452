use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gramprof::scoring::{Aggregation, FilterMode, DEFAULT_FILTER_THRESHOLD, DEFAULT_ZERO_PROFILE_DISTANCE};
use gramprof::{FeatureKind, MethodConfig};

mod commands;
mod config;

/// Lexical semantic change detection from grammatical profiles.
#[derive(Debug, Parser)]
#[command(name = "gramprof", version, about)]
struct Cli {
    /// Seed for randomized procedures. Every current command is
    /// deterministic, so the value is recorded but has no effect.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count grammatical profiles of the target words into a profile store.
    Extract(ExtractArgs),
    /// Score every target word on one period pair.
    Score(ScoreArgs),
    /// Show the most changed words of one or more period pairs.
    Rank(RankArgs),
    /// Turn a score file into binary change labels.
    Classify(ClassifyArgs),
    /// Compare predictions with gold annotations.
    Evaluate(EvaluateArgs),
    /// Relate per-category distances to gold annotations.
    Analyze(AnalyzeArgs),
    /// Value proportions of one grammatical category across periods.
    Timeline(TimelineArgs),
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Dataset configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Profile store to write.
    #[arg(long, short)]
    output: PathBuf,
    /// Abort on the first malformed CONLL-U line instead of skipping it.
    #[arg(long)]
    strict: bool,
    /// Match lemmas case-insensitively.
    #[arg(long)]
    case_fold: bool,
    /// Match on the word form instead of the lemma.
    #[arg(long)]
    match_form: bool,
    /// Count `nmod:poss` as `nmod`.
    #[arg(long)]
    strip_deprel_subtype: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Features {
    Morphology,
    Syntax,
    Average,
    Combination,
}

impl From<Features> for FeatureKind {
    fn from(f: Features) -> Self {
        match f {
            Features::Morphology => FeatureKind::Morphology,
            Features::Syntax => FeatureKind::Syntax,
            Features::Average => FeatureKind::Average,
            Features::Combination => FeatureKind::Combination,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AggregateArg {
    Max,
    Mean,
}

#[derive(Debug, Args)]
struct FilterArgs {
    /// Drop features rarer than this share of the word's occurrences.
    /// Use 0 to disable filtering.
    #[arg(long, default_value_t = DEFAULT_FILTER_THRESHOLD)]
    filter: f64,
    /// Apply the threshold to each period separately.
    #[arg(long)]
    filter_per_period: bool,
    /// Distance assigned when a word has no features in exactly one period.
    #[arg(long, default_value_t = DEFAULT_ZERO_PROFILE_DISTANCE)]
    zero_profile_distance: f64,
    /// How per-category distances are aggregated.
    #[arg(long, value_enum, default_value_t = AggregateArg::Max)]
    aggregate: AggregateArg,
}

#[derive(Debug, Args)]
struct MethodArgs {
    /// Feature set to compare.
    #[arg(long, value_enum, default_value_t = Features::Morphology)]
    features: Features,
    /// Compare each morphological category on its own.
    #[arg(long)]
    separate: bool,
    #[command(flatten)]
    filter: FilterArgs,
}

impl FilterArgs {
    fn method(&self, feature_kind: FeatureKind, separation: bool) -> MethodConfig {
        MethodConfig {
            feature_kind,
            separation,
            aggregation: match self.aggregate {
                AggregateArg::Max => Aggregation::Max,
                AggregateArg::Mean => Aggregation::Mean,
            },
            filter_threshold: self.filter,
            filter_mode: if self.filter_per_period {
                FilterMode::PerPeriod
            } else {
                FilterMode::Summed
            },
            zero_profile_distance: self.zero_profile_distance,
        }
    }
}

impl MethodArgs {
    fn config(&self) -> MethodConfig {
        self.filter.method(self.features.into(), self.separate)
    }
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Profile store written by `extract`.
    #[arg(long)]
    store: PathBuf,
    /// Period pair as `OLD:NEW`; defaults to the first pair of the store.
    #[arg(long)]
    pair: Option<String>,
    #[command(flatten)]
    method: MethodArgs,
    /// Add the morphological, syntactic and per-category distances.
    #[arg(long)]
    explain: bool,
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[arg(long)]
    store: PathBuf,
    /// Period pairs as `OLD:NEW`; defaults to every pair in the store.
    #[arg(long)]
    pair: Vec<String>,
    /// Number of words to show per pair.
    #[arg(long, default_value_t = 10)]
    top: usize,
    #[command(flatten)]
    method: MethodArgs,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// Score file (`word<TAB>score`).
    scores: PathBuf,
    /// Label this share of the ranking as changed.
    #[arg(long, conflicts_with = "changepoint")]
    ratio: Option<f64>,
    /// Place the boundary at the best single change point of the ranking.
    #[arg(long)]
    changepoint: bool,
    /// Second score file, classified the same way; the two label sets are
    /// averaged and rounded half up.
    #[arg(long)]
    with: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Task {
    Binary,
    Graded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Tsv,
    JsonLines,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Predictions: labels for the binary task, scores for the graded task.
    predictions: PathBuf,
    /// Gold file (`word<TAB>binary<TAB>graded`).
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, value_enum)]
    task: Task,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Report {
    Logreg,
    Correlation,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, value_enum)]
    report: Report,
    #[arg(long)]
    pair: Option<String>,
    #[command(flatten)]
    filter: FilterArgs,
    /// Keep only words whose id ends with this suffix (e.g. `_nn`).
    #[arg(long)]
    subset: Option<String>,
    /// Correlate each category only over the words in which it occurs.
    #[arg(long)]
    missing_as_absent: bool,
    /// Exact permutation p-values for small samples.
    #[arg(long)]
    exact_p: bool,
    /// Inverse regularization strength of the logistic regression.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Args)]
struct TimelineArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long)]
    word: String,
    /// Morphological category such as `Number`, or `syntax`.
    #[arg(long)]
    category: String,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Failures mapped to exit codes: 2 for invalid invocations or
/// configurations, 1 for problems with the data.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl From<gramprof::Error> for CliError {
    fn from(e: gramprof::Error) -> Self {
        if e.is_config() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(seed) = cli.seed {
        log::debug!("seed {seed} (no randomized step in this command)");
    }
    let result = match cli.command {
        Command::Extract(args) => commands::extract(&args),
        Command::Score(args) => commands::score(&args),
        Command::Rank(args) => commands::rank(&args),
        Command::Classify(args) => commands::classify(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Analyze(args) => commands::analyze(&args),
        Command::Timeline(args) => commands::timeline(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
