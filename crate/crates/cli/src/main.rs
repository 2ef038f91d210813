mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use semcolor_core::DecodeMode;

#[derive(Parser)]
#[command(name = "semcolor", version, about = "Semantic-guided colorization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic shapes corpus
    Synth(SynthArgs),
    /// Re-verify the invariants of a corpus on disk
    Check(CheckArgs),
    /// Train the two-branch network on a corpus
    Train(TrainArgs),
    /// Colorize a grayscale PNG with a trained model
    Colorize(ColorizeArgs),
    /// Compare two images (psnr) or two label maps (miou)
    Eval(EvalArgs),
    /// Joint bilateral filter of chroma against a same-size guide
    Filter(BilateralArgs),
    /// Joint bilateral upsampling of chroma to the guide's size
    Upsample(BilateralArgs),
    /// Write the quantized ab grid as text
    Grid(GridArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    size: usize,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    /// Give each class its own lightness band instead of a shared one
    #[arg(long)]
    separate_lightness: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Allowed per-pixel chroma deviation from the class color
    #[arg(long, default_value_t = semcolor_core::corpus::DISK_CHROMA_TOLERANCE)]
    tol: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Checkpoint to write
    #[arg(long)]
    out: PathBuf,
    /// `key = value` run configuration; flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-epoch loss table; defaults to the checkpoint path with `.report.txt`
    #[arg(long)]
    report: Option<PathBuf>,
    /// Keep the last N corpus images out of training and evaluate on them
    #[arg(long, default_value_t = 0)]
    holdout: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, alias = "lambda_c")]
    lambda_c: Option<f64>,
    #[arg(long, alias = "lambda_s")]
    lambda_s: Option<f64>,
}

#[derive(Args)]
struct ColorizeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Edge-aware upsampling of the predicted chroma (default)
    #[arg(long, overrides_with = "no_jbu")]
    jbu: bool,
    /// Bilinear upsampling instead
    #[arg(long)]
    no_jbu: bool,
    #[arg(long, value_parser = parse_decode, default_value = "annealed")]
    decode: DecodeMode,
    #[arg(long, default_value_t = semcolor_core::chroma::DEFAULT_TEMPERATURE)]
    temperature: f64,
    #[command(flatten)]
    bilateral: SigmaArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Psnr,
    Miou,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    metric: Metric,
    /// Predicted RGB image, or label image for miou
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    #[arg(long, default_value_t = 4)]
    classes: usize,
}

#[derive(Args, Clone, Copy)]
struct SigmaArgs {
    #[arg(long, default_value_t = semcolor_core::bilateral::DEFAULT_SIGMA_S)]
    sigma_s: f64,
    #[arg(long, default_value_t = semcolor_core::bilateral::DEFAULT_SIGMA_R)]
    sigma_r: f64,
}

#[derive(Args)]
struct BilateralArgs {
    /// Chroma as a CFT1 tensor of dims [2, h, w] or as a color PNG
    #[arg(long)]
    chroma: PathBuf,
    /// Guide PNG; gray values are used as 8-bit intensities
    #[arg(long)]
    guide: PathBuf,
    /// `.png` writes the result merged with the guide's lightness, anything else a tensor
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    sigma: SigmaArgs,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    out: PathBuf,
}

fn parse_decode(s: &str) -> Result<DecodeMode, String> {
    s.parse().map_err(|e: semcolor_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // help and version output
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or_default();
            eprintln!("semcolor: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Check(a) => commands::check(a),
        Command::Train(a) => commands::train(a),
        Command::Colorize(a) => commands::colorize(a),
        Command::Eval(a) => commands::eval(a),
        Command::Filter(a) => commands::bilateral(a, false),
        Command::Upsample(a) => commands::bilateral(a, true),
        Command::Grid(a) => commands::grid(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("semcolor: {e:#}");
            ExitCode::FAILURE
        }
    }
}
