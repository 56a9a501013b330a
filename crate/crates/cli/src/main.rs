mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use commands::*;
use config::{load_file, resolve, UsageError};

#[derive(Parser, Debug)]
#[command(
    name = "scalematch",
    about = "Object-size statistics, scale matching, tiling and evaluation for tiny-object datasets"
)]
struct Cli {
    /// TOML config file with one table per subcommand
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for per-image work (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mean and std of absolute size, relative size and aspect ratio
    Stats(StatsFlags),
    /// Size histogram as CSV
    Hist(HistFlags),
    /// Scale Match: rescale images so object sizes follow a target dataset
    Match(MatchFlags),
    /// Monotone Scale Match: order-preserving variant of `match`
    Msm(MatchFlags),
    /// Cut images and annotations into overlapping tiles
    Tile(TileFlags),
    /// Map tile detections back to their images and merge with NMS
    Merge(MergeFlags),
    /// AP and log-average miss rate per size partition and IoU threshold
    Eval(EvalFlags),
    /// Generate a synthetic dataset
    Synth(SynthFlags),
    /// k-means clusters of box sizes and aspect ratios
    ClusterAnchors(AnchorFlags),
}

fn version() -> String {
    use scalematch_core::{dataset::ANNOTATIONS_SCHEMA, eval::EVAL_REPORT_SCHEMA};
    use scalematch_core::{scale::SCALE_PLAN_SCHEMA, tiling::TILE_INDEX_SCHEMA};
    format!(
        "{}\nschemas: {ANNOTATIONS_SCHEMA}, {SCALE_PLAN_SCHEMA}, {TILE_INDEX_SCHEMA}, {EVAL_REPORT_SCHEMA}",
        env!("CARGO_PKG_VERSION")
    )
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(config::usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config::usage(format!("--workers: {e}")))?;
    }
    let file = cli.config.as_deref().map(load_file).transpose()?;
    let file = file.as_ref();
    match cli.command {
        Command::Stats(f) => stats(resolve(file, "stats", &f)?),
        Command::Hist(f) => hist(resolve(file, "hist", &f)?),
        Command::Match(f) => scale_match(resolve(file, "match", &f)?, false),
        Command::Msm(f) => scale_match(resolve(file, "msm", &f)?, true),
        Command::Tile(f) => tile(resolve(file, "tile", &f)?),
        Command::Merge(f) => merge(resolve(file, "merge", &f)?),
        Command::Eval(f) => eval(resolve(file, "eval", &f)?),
        Command::Synth(f) => {
            let mut cfg: SynthConfig = resolve(file, "synth", &f)?;
            if let (Some(median), Some(sigma)) = (f.median, f.sigma) {
                cfg.size_law = scalematch_core::synth::SizeLaw::Lognormal { mu: median.ln(), sigma };
            }
            synth(cfg)
        }
        Command::ClusterAnchors(f) => cluster(resolve(file, "cluster-anchors", &f)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // leaked once; clap keeps `&'static str`
    let version: &'static str = Box::leak(version().into_boxed_str());
    let matches = Cli::command().version(version).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            eprintln!("run `scalematch --help` for usage");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
