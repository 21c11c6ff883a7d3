use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use secstab_cli::config::{default_toml, PipelineConfig, Stage};
use secstab_cli::pipeline::{load_birkhoff, load_secular, stability_curve, StageStatus};
use secstab_cli::report::report;
use secstab_core::secular::emit_degree4_table;
use secstab_core::stability::{log_grid, radii_from_initial, write_curve_csv};

#[derive(Parser)]
#[command(name = "secstab", version, about = "Secular stability pipeline for the planar Sun-Jupiter-Saturn-Uranus problem")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set expansion.max_deg_sec=6` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory (same as `--set output.dir=...`).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self, extra: Vec<String>) -> Result<PipelineConfig> {
        let mut sets = self.sets.clone();
        if let Some(o) = &self.out {
            sets.push(format!("output.dir=\"{}\"", o.display()));
        }
        sets.extend(extra);
        PipelineConfig::resolve(self.config.as_deref(), std::env::vars(), &sets)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the pipeline stages, skipping those already up to date.
    Run {
        #[command(flatten)]
        common: Common,
        /// Comma-separated prefix of orbits,expansion,secular,birkhoff,stability.
        #[arg(long, value_delimiter = ',')]
        stages: Vec<Stage>,
        /// Recompute even when the manifests match.
        #[arg(long)]
        force: bool,
    },
    /// Summarize an output directory.
    Report {
        #[command(flatten)]
        common: Common,
    },
    /// Recompute the stability curve on a new grid from the Birkhoff artifact.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rho_min: Option<f64>,
        #[arg(long)]
        rho_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// Safety factor of the polydisk radii.
        #[arg(long)]
        c: Option<f64>,
        /// Destination CSV; standard output when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the degree-2 and degree-4 coefficient table of the secular Hamiltonian.
    EmitAppendix {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the default configuration.
    DefaultConfig,
}

fn emit(output: Option<PathBuf>, data: &[u8]) -> Result<()> {
    match output {
        Some(p) => fs::write(&p, data).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(data)?),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().cmd {
        Cmd::Run { common, stages, force } => {
            let extra = if stages.is_empty() {
                Vec::new()
            } else {
                vec![format!("stages={}", stages.iter().map(|s| s.name()).collect::<Vec<_>>().join(","))]
            };
            let cfg = common.resolve(extra)?;
            for (stage, st) in secstab_cli::run(&cfg, force)? {
                match st {
                    StageStatus::Ran { seconds } => println!("{stage}: ran in {seconds:.1} s"),
                    StageStatus::UpToDate => println!("{stage}: up to date"),
                }
            }
        }
        Cmd::Report { common } => {
            let cfg = common.resolve(Vec::new())?;
            print!("{}", report(&cfg.output.dir)?);
        }
        Cmd::Sweep { common, rho_min, rho_max, points, c, output } => {
            let cfg = common.resolve(Vec::new())?;
            let s = &cfg.stability;
            let grid = log_grid(rho_min.unwrap_or(s.rho_min), rho_max.unwrap_or(s.rho_max), points.unwrap_or(s.rho_points));
            let (b, nf) = load_birkhoff(&cfg.output.dir)?;
            let radii = radii_from_initial(&b.x0, &b.y0)?;
            let curve = stability_curve(&nf, &radii, c.unwrap_or(s.c), &grid)?;
            let mut buf = Vec::new();
            write_curve_csv(&curve, &mut buf)?;
            emit(output, &buf)?;
        }
        Cmd::EmitAppendix { common, output } => {
            let cfg = common.resolve(Vec::new())?;
            let sec = load_secular(&cfg.output.dir)?;
            emit(output, emit_degree4_table(&sec).as_bytes())?;
        }
        Cmd::DefaultConfig => print!("{}", default_toml()),
    }
    Ok(())
}
