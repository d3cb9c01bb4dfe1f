//! `contour-nmpc`: run scenarios, batches and diagnostics from the command line.
//!
//! Exit codes: 0 on success (run converged, batch passed), 1 on configuration
//! or I/O errors, 2 when a run aborts or fails to converge, or a batch falls
//! short of its pass fraction.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use contour_nmpc::analysis::svg::{barrier_plot, error_plot};
use contour_nmpc::analysis::{run_batch, summarize, BatchSpec};
use contour_nmpc::sim::{run_scenario, ScenarioConfig, Setup};
use contour_nmpc::Error;

/// Environment variable overriding the output directory.
const OUT_ENV: &str = "CONTOUR_NMPC_OUT";

#[derive(Parser)]
#[command(name = "contour-nmpc", version, about = "Visual-servoing NMPC simulator for deformable polygon targets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV log, JSON sidecar and plots.
    Run {
        config: PathBuf,
        /// Output directory; overrides the environment variable and the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_plots: bool,
        /// Replaces the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a batch of scenarios in parallel and aggregate their statistics.
    Batch {
        spec: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the stability and feasibility diagnostics of a scenario as JSON.
    Diagnose { config: PathBuf },
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    ScenarioConfig::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn out_dir(flag: Option<PathBuf>, fallback: &str) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from(fallback))
}

fn cmd_run(config: &Path, out: Option<PathBuf>, no_plots: bool, seed: Option<u64>) -> Result<(), Failure> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let dir = out_dir(out, &cfg.output.dir);
    let log = run_scenario(&cfg)?;
    let csv = log.write(&dir)?;
    if cfg.output.plots && !no_plots {
        std::fs::write(dir.join(format!("{}_errors.svg", cfg.name)), error_plot(&log)).map_err(Error::from)?;
        std::fs::write(dir.join(format!("{}_barriers.svg", cfg.name)), barrier_plot(&log)).map_err(Error::from)?;
    }
    let summary = summarize(&log);
    println!("wrote {}", csv.display());
    if let Some(ss) = &summary.steady_state {
        println!(
            "steady state: centroid {:.3} px, sigma {:.4}, angle {:.3} deg, barrier gap {:.4}/{:.4}",
            ss.centroid_px, ss.sigma, ss.angle_deg, ss.barrier_gap[0], ss.barrier_gap[1]
        );
    }
    if let Some(abort) = &log.abort {
        return Err(Failure::Run(format!("run aborted at t = {}: {}", abort.t, abort.error)));
    }
    if !summary.converged {
        return Err(Failure::Run("run did not meet the convergence thresholds".into()));
    }
    println!("converged");
    Ok(())
}

fn cmd_batch(spec_path: &Path, jobs: usize, out: Option<PathBuf>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(spec_path).map_err(|e| Failure::Config(format!("{}: {e}", spec_path.display())))?;
    let spec = BatchSpec::from_json(&text)?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    let dir = out_dir(out, &format!("runs/{}", spec.name));
    let outcome = run_batch(&spec, base, &dir, jobs)?;
    for s in &outcome.sessions {
        let status = if s.converged {
            "converged"
        } else if s.aborted {
            "aborted"
        } else {
            "not converged"
        };
        match &s.error {
            Some(e) => println!("{}: {status} ({e})", s.name),
            None => println!("{}: {status}", s.name),
        }
    }
    println!(
        "{} of {} sessions converged; results in {}",
        outcome.sessions.iter().filter(|s| s.converged).count(),
        outcome.sessions.len(),
        dir.display()
    );
    if outcome.passed() {
        Ok(())
    } else {
        Err(Failure::Run("too few sessions converged".into()))
    }
}

fn cmd_diagnose(config: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let setup = Setup::new(&cfg)?;
    let report = serde_json::json!({
        "name": cfg.name,
        "x_des": setup.x_des,
        "disturbance_bound": setup.disturbance_bound,
        "diagnostics": setup.diagnostics,
    });
    println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Failure::Config(e.to_string()))?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, no_plots, seed } => cmd_run(&config, out, no_plots, seed),
        Command::Batch { spec, jobs, out } => cmd_batch(&spec, jobs, out),
        Command::Diagnose { config } => cmd_diagnose(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
