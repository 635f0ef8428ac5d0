use std::path::PathBuf;
use std::process::ExitCode;

use cishtex_cli::stages::{self, StageReport};
use cishtex_cli::{CliError, Result, RunConfig};
use cishtex_core::reduction::ReductionMethod;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "cishtex", version, about = "Texture-based grading of stained tissue images")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tile the image and write features.csv
    Extract,
    /// Project features.csv to reduced.csv
    Reduce,
    /// Fuzzy c-means on reduced.csv, writes clusters.csv
    Cluster,
    /// Partition coefficient over the configured cluster range
    Sweep,
    /// Paint class_map.png and legend.png
    Render,
    /// Draw blind tiles per class, writes manifest.json and crops
    Sample,
    /// Grade annotations.csv against the sampled classes, writes report.json
    Aggregate,
    /// extract, reduce, cluster, render and sample in one run
    Pipeline,
    /// Print the resolved configuration as JSON
    Config,
}

#[derive(Debug, Args)]
struct Overrides {
    /// JSON run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    image: Option<PathBuf>,
    #[arg(long, global = true)]
    mask: Option<PathBuf>,
    #[arg(long, global = true)]
    annotations: Option<PathBuf>,
    /// Number of fuzzy clusters
    #[arg(long, global = true)]
    clusters: Option<usize>,
    /// svd or pca
    #[arg(long, global = true)]
    method: Option<ReductionMethod>,
    /// Gray levels per channel
    #[arg(long, global = true)]
    bins: Option<usize>,
    /// Tile diameter in micrometres
    #[arg(long, global = true)]
    tile_um: Option<f64>,
    /// Lattice step in micrometres
    #[arg(long, global = true)]
    step_um: Option<f64>,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = &self.image {
            cfg.image = Some(v.clone());
        }
        if let Some(v) = &self.mask {
            cfg.mask = Some(v.clone());
        }
        if let Some(v) = &self.annotations {
            cfg.annotations = Some(v.clone());
        }
        if let Some(v) = self.clusters {
            cfg.clustering.clusters = v;
        }
        if let Some(v) = self.method {
            cfg.reduction.method = v;
        }
        if let Some(v) = self.bins {
            cfg.gray_levels = v;
        }
        if let Some(v) = self.tile_um {
            cfg.tile.diameter_um = v;
        }
        if let Some(v) = self.step_um {
            cfg.tile.step_um = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_reports(reports: &[StageReport]) {
    for r in reports {
        println!("{}: {}", r.stage, r.files.join(", "));
        for w in &r.warnings {
            log::warn!("{}: {w}", r.stage);
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.overrides.resolve()?;
    let reports = match cli.command {
        Command::Extract => vec![stages::extract(&cfg)?],
        Command::Reduce => vec![stages::reduce(&cfg)?],
        Command::Cluster => vec![stages::cluster(&cfg)?],
        Command::Sweep => vec![stages::sweep(&cfg)?],
        Command::Render => vec![stages::render(&cfg)?],
        Command::Sample => vec![stages::sample(&cfg)?],
        Command::Aggregate => vec![stages::aggregate(&cfg)?],
        Command::Pipeline => stages::pipeline(&cfg)?,
        Command::Config => {
            let json = serde_json::to_string_pretty(&cfg).map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
            println!("{json}");
            Vec::new()
        }
    };
    print_reports(&reports);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::FAILURE
        }
    }
}
