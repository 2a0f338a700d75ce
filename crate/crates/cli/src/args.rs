use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ratio_cpd::{DatasetId, EstimatorKind, Scaling, ScoreKind};

#[derive(Debug, Parser)]
#[command(name = "ratio-cpd", version, about = "Density-ratio change-point detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark series and its change points.
    Generate(GenerateArgs),
    /// Compute the dissimilarity score D(t) over a series.
    Detect(DetectArgs),
    /// ROC AUC of a score file against change-point labels.
    Evaluate(EvaluateArgs),
    /// Run every estimator on repeated instances of the synthetic datasets.
    Benchmark(BenchmarkArgs),
    /// Render a series and its scores as a two-panel SVG.
    ExportPlot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Dataset number.
    #[arg(long, value_parser = parse_dataset, required_unless_present = "from_manifest")]
    pub dataset: Option<DatasetId>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Series CSV, one timestamp per row.
    #[arg(long, required_unless_present = "from_manifest")]
    pub out_series: Option<PathBuf>,
    /// Change points, one index per line.
    #[arg(long, required_unless_present = "from_manifest")]
    pub out_labels: Option<PathBuf>,
    /// Replay a previous generate manifest.
    #[arg(long, conflicts_with_all = ["dataset", "seed"])]
    pub from_manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// n = 200, for series whose change points are close together.
    ShortGap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoreArg {
    Pe,
    Kl,
}

impl From<ScoreArg> for ScoreKind {
    fn from(s: ScoreArg) -> Self {
        match s {
            ScoreArg::Pe => ScoreKind::PearsonSymmetric,
            ScoreArg::Kl => ScoreKind::KlSymmetric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalingArg {
    Auto,
    None,
    Window,
}

impl From<ScalingArg> for Scaling {
    fn from(s: ScalingArg) -> Self {
        match s {
            ScalingArg::Auto => Scaling::Auto,
            ScalingArg::None => Scaling::None,
            ScalingArg::Window => Scaling::Window,
        }
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Series CSV, one timestamp per row.
    #[arg(long, required_unless_present = "from_manifest")]
    pub input: Option<PathBuf>,
    /// Skip the first line of the input.
    #[arg(long)]
    pub header: bool,
    #[arg(long, value_parser = parse_estimator, default_value = "gbdt-classifier")]
    pub estimator: EstimatorKind,
    /// Defaults to pe for ratio models and kl for classifiers.
    #[arg(long, value_enum)]
    pub score: Option<ScoreArg>,
    /// Embedding length.
    #[arg(short, long, default_value_t = 10)]
    pub k: usize,
    /// Embeddings per sample; 500 unless a preset says otherwise.
    #[arg(short, long)]
    pub n: Option<usize>,
    /// Random splits averaged per timestamp.
    #[arg(short, long, default_value_t = 1)]
    pub m: usize,
    /// Stride between evaluated timestamps.
    #[arg(long, default_value_t = 1)]
    pub dt: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, value_enum, default_value = "auto")]
    pub scaling: ScalingArg,
    /// Report alarms where D crosses this level.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Scores CSV with columns t, D.
    #[arg(long, required_unless_present = "from_manifest")]
    pub out: Option<PathBuf>,
    /// Replay a previous detect manifest; `--out` may redirect the output.
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
    #[command(flatten)]
    pub jobs: JobsArg,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Scores CSV written by `detect`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Change points, one index per line.
    #[arg(long)]
    pub labels: PathBuf,
    /// Sample size used for labeling; read from the scores manifest if omitted.
    #[arg(short, long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchPreset {
    /// 3 runs, stride 25.
    Desk,
    /// 10 runs, stride 1.
    Paper,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: BenchPreset,
    /// Comma-separated dataset numbers.
    #[arg(long, value_delimiter = ',', value_parser = parse_dataset)]
    pub datasets: Vec<DatasetId>,
    /// Comma-separated estimator names.
    #[arg(long, value_delimiter = ',', value_parser = parse_estimator)]
    pub estimators: Vec<EstimatorKind>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub dt: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Result table CSV.
    #[arg(long, required_unless_present = "from_manifest")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,
    #[command(flatten)]
    pub jobs: JobsArg,
}

#[derive(Debug, Args)]
pub struct JobsArg {
    /// Worker threads; 1 runs sequentially. Defaults to all cores.
    #[arg(long, env = "RATIO_CPD_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub scores: PathBuf,
    /// Optional change points drawn as vertical markers.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_dataset(s: &str) -> Result<DatasetId, String> {
    s.parse().map_err(|e: ratio_cpd::CpdError| e.to_string())
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, String> {
    s.parse().map_err(|_| {
        let names: Vec<_> = EstimatorKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown estimator '{s}'; expected one of {}", names.join(", "))
    })
}
