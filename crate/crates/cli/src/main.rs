//! `cartoseg` command-line entry point.
//!
//! Exit status: 0 on success, 1 when arguments, configuration or inputs fail
//! validation, 2 when the work itself fails.

mod commands;
mod config;
mod provenance;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use config::RunConfig;

/// A problem with what was asked for rather than with doing it.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn build_id() -> String {
    format!(
        "{} (library {}, wire protocol SGH1/SGT1/SGL1/SGE1)",
        env!("CARGO_PKG_VERSION"),
        cartoseg::VERSION
    )
}

#[derive(Parser, Debug)]
#[command(name = "cartoseg", version = build_id(), about = "Synthetic map data, tiled segmentation inference and evaluation")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// error, warn, info, debug or trace. RUST_LOG takes precedence.
    #[arg(long, global = true)]
    log_level: Option<String>,
    /// Directory that relative output paths resolve against.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render synthetic map images with their label masks.
    Synth(SynthArgs),
    /// Segment an image (or a directory of images) with a backend.
    Infer(InferArgs),
    /// Score predicted masks against ground truth.
    Eval(EvalArgs),
    /// Regress per-image mIoU on map metadata.
    Bias(BiasArgs),
    /// Fit per-class color mixtures from images and masks.
    Colorfit(ColorfitArgs),
    /// Write the bundled procedural feature corpus and default palette.
    Fixtures(FixturesArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Directory of `.ndjson` feature files.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Color model JSON (default palette if omitted).
    #[arg(long)]
    colors: Option<PathBuf>,
    /// Place-name list, one per line.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    count: Option<u64>,
    /// Sample `i` uses seed `seed + i`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    /// Image file or directory of images.
    #[arg(long)]
    input: Option<PathBuf>,
    /// `oracle:DIR`, `heuristic:FILE` (or `heuristic:default`) or `extern:CMD`.
    #[arg(long)]
    backend: Option<String>,
    /// Comma-separated scale factors.
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    #[arg(long)]
    patch: Option<u32>,
    #[arg(long)]
    overlap: Option<u32>,
    /// bilinear or nearest.
    #[arg(long)]
    upsample: Option<String>,
    /// Mask PNG, or a directory when the input is one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write fused logits (`.lgt` file, or a directory).
    #[arg(long)]
    logits: Option<PathBuf>,
    /// Per-tile deadline for external backends.
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Process count for external backends that allow concurrency.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    /// sample-normalized-macro, micro, macro or per-class-macro.
    #[arg(long)]
    strategy: Option<String>,
    /// geographic or all.
    #[arg(long)]
    classes: Option<String>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    confusion: Option<PathBuf>,
    /// none, per-prediction or per-ground-truth.
    #[arg(long)]
    normalize: Option<String>,
}

#[derive(Args, Debug)]
pub struct BiasArgs {
    /// Report written by `eval`.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// CSV: id, partition, institution, pub_country, cov_country, scale_denominator, pub_year.
    #[arg(long)]
    metadata: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Records with a category value seen fewer times are dropped.
    #[arg(long)]
    min_count: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ColorfitArgs {
    #[arg(long)]
    images: Option<PathBuf>,
    /// Defaults to the image directory.
    #[arg(long)]
    masks: Option<PathBuf>,
    #[arg(long)]
    components: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    samples_per_class: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FixturesArgs {
    #[arg(long)]
    regions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Infer(_) => "infer",
            Command::Eval(_) => "eval",
            Command::Bias(_) => "bias",
            Command::Colorfit(_) => "colorfit",
            Command::Fixtures(_) => "fixtures",
        }
    }
}

fn init_logging(level: Option<&str>) -> anyhow::Result<()> {
    let level = level.unwrap_or("warn");
    let filter: log::LevelFilter =
        level.parse().map_err(|_| Invalid(format!("unknown log level `{level}`")))?;
    env_logger::Builder::new().filter_level(filter).parse_default_env().format_timestamp(None).try_init().ok();
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.log_level.is_some() {
        cfg.log_level = cli.log_level.clone();
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    if cli.out_dir.is_some() {
        cfg.out_dir = cli.out_dir.clone();
    }
    init_logging(cfg.log_level.as_deref())?;
    if let Some(n) = cfg.jobs {
        if n == 0 {
            return Err(Invalid("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    match cli.command {
        Command::Synth(a) => commands::synth(&cfg, a),
        Command::Infer(a) => commands::infer(&cfg, a),
        Command::Eval(a) => commands::eval(&cfg, a),
        Command::Bias(a) => commands::bias(&cfg, a),
        Command::Colorfit(a) => commands::colorfit(&cfg, a),
        Command::Fixtures(a) => commands::fixtures(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let sub = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<Invalid>()) {
                let mut root = Cli::command();
                root.build();
                if let Some(cmd) = root.find_subcommand_mut(sub) {
                    eprintln!("\n{}\nFor more information, try 'cartoseg {sub} --help'.", cmd.render_usage());
                }
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
