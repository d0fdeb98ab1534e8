mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kernelseg::context::Architecture;
use kernelseg::harness::{SyntheticKind, ThresholdMetric};

#[derive(Parser)]
#[command(
    name = "kseg",
    version,
    about = "Boosted kernel segmentation with context cascades"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a context cascade (or a single boosted classifier) from a dataset manifest.
    Train(TrainArgs),
    /// Write score maps and label images for one split of a manifest.
    Predict(PredictArgs),
    /// Score a model against the ground truth of one split.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic dataset together with its manifest.
    GenSynthetic(GenArgs),
    /// Export the learned kernels of a model as PNG tiles.
    DumpKernels(DumpArgs),
    /// Print every default setting as TOML.
    Defaults,
}

#[derive(Args)]
pub struct SettingsArgs {
    /// TOML configuration; unset keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset manifest; its `train` split is used.
    #[arg(long)]
    pub data: PathBuf,
    /// Output model file.
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub settings: SettingsArgs,
    #[arg(long, value_parser = parse_architecture)]
    pub architecture: Option<Architecture>,
    /// Train one boosted classifier without context stages or fusion.
    #[arg(long)]
    pub boost_only: bool,
    /// Enable superpixel pooling with SLIC grid interval S and compactness m.
    #[arg(long, value_name = "S,m", value_parser = parse_superpixels)]
    pub superpixels: Option<(usize, f64)>,
    /// Fake-3D fusion descriptors from slices z-D, z and z+D.
    #[arg(long, value_name = "D")]
    pub fake3d: Option<usize>,
    /// Snowflake half-sides.
    #[arg(long, value_name = "h1,h2", value_delimiter = ',')]
    pub snowflake: Option<Vec<usize>>,
    /// Feed raw instead of normalized score maps to later stages.
    #[arg(long)]
    pub no_normalize: bool,
    /// Training diagnostics CSV.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Directory for debug images (superpixel maps).
    #[arg(long)]
    pub debug_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long, short)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test", value_parser = ["train", "test"])]
    pub split: String,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Configuration used for training (feature channels and input scaling).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long, short)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test", value_parser = ["train", "test"])]
    pub split: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Metric maximized by the binary threshold.
    #[arg(long, value_parser = parse_metric)]
    pub metric: Option<ThresholdMetric>,
    /// One pooled threshold for the whole split instead of one per image.
    #[arg(long)]
    pub global_threshold: bool,
    /// Also write the metrics as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args)]
pub struct GenArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: SyntheticKind,
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    /// Slices per volume (anisotropic-volume only).
    #[arg(long)]
    pub depth: Option<usize>,
    /// Noise standard deviation; each kind has its own default.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of training images or volumes.
    #[arg(long, default_value_t = 1)]
    pub train: usize,
    /// Number of test images or volumes.
    #[arg(long, default_value_t = 1)]
    pub test: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct DumpArgs {
    #[arg(long, short)]
    pub model: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Pixels per kernel weight in the tiles.
    #[arg(long, default_value_t = 8)]
    pub zoom: usize,
}

fn parse_architecture(s: &str) -> Result<Architecture, String> {
    s.parse().map_err(|e: kernelseg::Error| e.to_string())
}

fn parse_metric(s: &str) -> Result<ThresholdMetric, String> {
    s.parse().map_err(|e: kernelseg::Error| e.to_string())
}

fn parse_kind(s: &str) -> Result<SyntheticKind, String> {
    s.parse().map_err(|e: kernelseg::Error| e.to_string())
}

fn parse_superpixels(s: &str) -> Result<(usize, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected S,m")?;
    let size = a
        .trim()
        .parse()
        .map_err(|_| format!("bad grid interval `{a}`"))?;
    let m = b
        .trim()
        .parse()
        .map_err(|_| format!("bad compactness `{b}`"))?;
    Ok((size, m))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::GenSynthetic(a) => commands::gen_synthetic(&a),
        Command::DumpKernels(a) => commands::dump_kernels(&a),
        Command::Defaults => {
            print!("{}", kernelseg::harness::defaults_toml());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
