//! `percolab`: critical percolation experiments from the command line.
//!
//! Every run writes one CSV table (to `--csv` or standard output), prints its
//! tolerance checks to standard error and optionally records a JSON manifest
//! that `percolab replay` re-executes bit for bit.
//!
//! Exit status: 0 when every check passes, 2 when a check fails, 1 on usage
//! or input errors.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use percolab::estimators::{Check, GasketRoute, Runner, Tolerances};
use serde::{Deserialize, Serialize};

use config::{parse_seed, Experiment, Num, PointArg, RunConfig};

#[derive(Parser)]
#[command(name = "percolab", version, about = "Monte Carlo experiments for critical site percolation on the triangular lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Number of samples [default depends on the experiment]
    #[arg(long)]
    n: Option<u64>,
    /// Seed, decimal or 0x-prefixed hexadecimal
    #[arg(long, default_value = "42", value_parser = parse_seed)]
    seed: u64,
    /// Worker threads; affects wall time only [default: $PERCOLAB_WORKERS or all cores]
    #[arg(long)]
    workers: Option<usize>,
    /// CSV output path [default: standard output]
    #[arg(long)]
    csv: Option<PathBuf>,
    /// JSON manifest output path
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    tol: TolArgs,
}

#[derive(Args)]
struct TolArgs {
    /// Standard errors allowed on ratio and oracle checks
    #[arg(long)]
    sigmas: Option<f64>,
    /// Absolute tolerance on the bulk one-arm slope
    #[arg(long)]
    tol_bulk_slope: Option<f64>,
    /// Absolute tolerance on the boundary one-arm slope
    #[arg(long)]
    tol_boundary_slope: Option<f64>,
    /// Relative tolerance on anchored ratios
    #[arg(long)]
    tol_anchored: Option<f64>,
    /// Relative tolerance on gasket ratios
    #[arg(long)]
    tol_gasket: Option<f64>,
    /// Relative tolerance on the multipoint ratio
    #[arg(long)]
    tol_multipoint: Option<f64>,
}

impl TolArgs {
    fn resolve(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            sigmas: self.sigmas.unwrap_or(d.sigmas),
            bulk_slope: self.tol_bulk_slope.unwrap_or(d.bulk_slope),
            boundary_slope: self.tol_boundary_slope.unwrap_or(d.boundary_slope),
            anchored_rel: self.tol_anchored.unwrap_or(d.anchored_rel),
            gasket_rel: self.tol_gasket.unwrap_or(d.gasket_rel),
            multipoint_rel: self.tol_multipoint.unwrap_or(d.multipoint_rel),
            mesh_stability_rel: d.mesh_stability_rel,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    Collar,
    PerPoint,
}

#[derive(Subcommand)]
enum Command {
    /// Bulk one-arm sweep over radii with a power-law fit
    OneArm {
        #[arg(long, default_value = "1/512")]
        mesh: Num,
        #[arg(long, value_delimiter = ',', default_value = "1/16,1/8,1/4,1/2")]
        eps: Vec<Num>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Boundary one-arm sweep in the upper half-plane
    BoundaryArm {
        #[arg(long, default_value = "1/512")]
        mesh: Num,
        #[arg(long, value_delimiter = ',', default_value = "1/16,1/8,1/4,1/2")]
        eps: Vec<Num>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Anchored cluster density profile; points as x,y or r@degrees
    Anchored {
        #[arg(long, default_value = "1/128")]
        mesh: Num,
        #[arg(long, value_delimiter = ';', allow_hyphen_values = true, default_value = "0,1/2;1/2@30;0,1/4")]
        points: Vec<PointArg>,
        #[arg(long, default_value = "4")]
        box_factor: Num,
        /// Skip the radius-1 one-arm normalizers
        #[arg(long)]
        no_normalizers: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Gasket density profile in a bounded domain
    Gasket {
        #[arg(long, default_value = "1/128")]
        mesh: Num,
        /// disk:cx,cy,R with an optional *s+tx,ty suffix
        #[arg(long, default_value = "disk:0,0,1")]
        domain: String,
        #[arg(long, value_delimiter = ';', allow_hyphen_values = true, default_value = "0,0;0.9,0")]
        points: Vec<PointArg>,
        #[arg(long, value_enum, default_value = "collar")]
        route: RouteArg,
        /// Skip the radius-1 one-arm normalizer
        #[arg(long)]
        no_normalizer: bool,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Product and symmetry check of the doubled half-plane event
    Images {
        #[arg(long, default_value = "1/64")]
        mesh: Num,
        #[arg(long, allow_hyphen_values = true, default_value = "0,1")]
        z: PointArg,
        #[arg(long, default_value = "4")]
        box_factor: Num,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Scale covariance of a bulk-boundary multipoint connection
    Multipoint {
        #[arg(long, default_value = "1/128")]
        mesh: Num,
        #[arg(long, value_delimiter = ';', allow_hyphen_values = true, default_value = "0,1/4")]
        bulk: Vec<PointArg>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1/8,1/8")]
        boundary: Vec<Num>,
        #[arg(long, default_value = "2")]
        scale: Num,
        #[arg(long, default_value = "4")]
        box_factor: Num,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Exact enumeration on small patches against Monte Carlo
    Oracle {
        /// one-arm, boundary-arm, anchored, multipoint or gasket [default: all]
        #[arg(long)]
        event: Option<String>,
        /// Patch label, e.g. 4x4 or r5/2 [default: all for the event]
        #[arg(long)]
        patch: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Audit every per-sample invariant of the detectors
    Selftest {
        #[arg(long, default_value = "1/32")]
        mesh: Num,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Re-run the configuration recorded in a manifest
    Replay {
        manifest: PathBuf,
        /// Override the recorded CSV path
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write a fresh manifest here
        #[arg(long = "manifest-out")]
        manifest_out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    tool: String,
    version: String,
    config: RunConfig,
    wall_time_secs: f64,
    passed: bool,
    summary: serde_json::Value,
    checks: Vec<Check>,
}

fn default_n(e: &Experiment) -> u64 {
    match e {
        Experiment::OneArm { .. } | Experiment::BoundaryArm { .. } => 200_000,
        Experiment::Gasket { .. } => 100_000,
        Experiment::Selftest { .. } => 10_000,
        _ => 1_000_000,
    }
}

fn build(experiment: Experiment, run: RunArgs) -> RunConfig {
    RunConfig {
        n: run.n.unwrap_or_else(|| default_n(&experiment)),
        experiment,
        seed: run.seed,
        workers: run.workers.unwrap_or_else(|| Runner::default().workers).max(1),
        csv: run.csv,
        manifest: run.manifest,
        tolerances: run.tol.resolve(),
    }
}

fn config(command: Command) -> Result<RunConfig> {
    Ok(match command {
        Command::OneArm { mesh, eps, run } => build(Experiment::OneArm { mesh, eps }, run),
        Command::BoundaryArm { mesh, eps, run } => build(Experiment::BoundaryArm { mesh, eps }, run),
        Command::Anchored { mesh, points, box_factor, no_normalizers, run } => {
            build(Experiment::Anchored { mesh, points, box_factor, normalizers: !no_normalizers }, run)
        }
        Command::Gasket { mesh, domain, points, route, no_normalizer, run } => {
            let route = match route {
                RouteArg::Collar => GasketRoute::Collar,
                RouteArg::PerPoint => GasketRoute::PerPoint,
            };
            build(Experiment::Gasket { mesh, domain, points, route, normalizer: !no_normalizer }, run)
        }
        Command::Images { mesh, z, box_factor, run } => build(Experiment::Images { mesh, z, box_factor }, run),
        Command::Multipoint { mesh, bulk, boundary, scale, box_factor, run } => {
            build(Experiment::Multipoint { mesh, bulk, boundary, scale, box_factor }, run)
        }
        Command::Oracle { event, patch, run } => build(Experiment::Oracle { event, patch }, run),
        Command::Selftest { mesh, run } => build(Experiment::Selftest { mesh }, run),
        Command::Replay { manifest, csv, manifest_out, workers } => {
            let text = std::fs::read_to_string(&manifest).with_context(|| format!("reading {}", manifest.display()))?;
            let recorded: Manifest =
                serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", manifest.display()))?;
            let mut cfg = recorded.config;
            if csv.is_some() {
                cfg.csv = csv;
            }
            cfg.manifest = manifest_out;
            if let Some(w) = workers {
                cfg.workers = w.max(1);
            }
            cfg
        }
    })
}

fn execute(cfg: RunConfig) -> Result<bool> {
    let start = Instant::now();
    let out = run::execute(&cfg)?;
    let wall = start.elapsed().as_secs_f64();
    match &cfg.csv {
        Some(path) => std::fs::write(path, &out.csv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", String::from_utf8_lossy(&out.csv)),
    }
    for c in &out.checks {
        eprintln!("{c}");
    }
    let passed = out.passed();
    if let Some(path) = &cfg.manifest {
        let m = Manifest {
            tool: "percolab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            wall_time_secs: wall,
            passed,
            summary: out.summary,
            checks: out.checks,
            config: cfg.clone(),
        };
        let json = serde_json::to_string_pretty(&m)?;
        std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match config(cli.command).and_then(execute) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
