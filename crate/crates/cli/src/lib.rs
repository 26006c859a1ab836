//! The `abstain` command line: generate data, fit models, score a split,
//! evaluate rejection curves and render a report.

mod commands;
mod metrics;
mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use metrics::{MetricRow, Metrics};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "abstain", version, about = "Uncertainty scoring and selective-prediction evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and its manifest.
    GenSynth(GenSynthArgs),
    /// Fit density models on train (and the Beta model on validation).
    Fit(FitArgs),
    /// Score one split with the requested methods.
    Score(ScoreArgs),
    /// Build rejection curves and normalized AUCs from a score table.
    Evaluate(EvaluateArgs),
    /// Render a comparison table and curve plots.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenSynthArgs {
    /// JSON synthetic spec; omitted fields take defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the spec.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Comma-separated method names, or `all`.
    #[arg(long, default_value = "all")]
    pub methods: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for the randomized fits (RDE subsampling and MCD starts).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    #[value(name = "rc_auc")]
    RcAuc,
    #[value(name = "fr_auc")]
    FrAuc,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long, default_value = "all")]
    pub methods: String,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Split used to fit the hybrid hyperparameters.
    #[arg(long, value_enum)]
    pub calibrate: Option<SplitArg>,
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveArg>,
    /// Coverage span the calibration objective integrates over.
    #[arg(long, value_enum, default_value_t = SpanArg::First50)]
    pub objective_span: SpanArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Instance,
    Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpanArg {
    Full,
    First50,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggregationArg {
    Mean,
    Max,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Instance)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = SpanArg::Both)]
    pub span: SpanArg,
    /// How label-pair scores combine into an instance score (multilabel).
    #[arg(long, value_enum, default_value_t = AggregationArg::Mean)]
    pub aggregation: AggregationArg,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for per-method curve CSVs and SVG plots.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub metrics: PathBuf,
    /// Curve directory written by `evaluate`; its SVG plots are embedded.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Output file; `.html` for a page, `.svg` for a bar chart.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

fn configure_threads() {
    if let Some(n) = std::env::var("ABSTAIN_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::GenSynth(a) => commands::gen_synth(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Score(a) => commands::score(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Report(a) => report::report(&a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            let code = e.downcast_ref::<abstain::Error>().map(abstain::Error::code);
            match code {
                Some(code) => eprintln!("error [{code}]: {e:#}"),
                None => eprintln!("error: {e:#}"),
            }
            EXIT_DATA
        }
    }
}
