use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use safeslide::scenario::{ResolvedScenario, RunStatus, Scenario, ScenarioError};
use safeslide::trajectory_csv::write_csv;

/// Grid used by `resolve` and `check`: per-axis positions and time samples.
const CHECK_GRID: usize = 50;
const CHECK_TIMES: usize = 100;

const EXIT_MONITOR: u8 = 1;
const EXIT_INPUT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "safeslide",
    version,
    about = "Simulate and monitor safe sliding-mode scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every initial condition, write CSVs and a report.
    Run {
        scenario: PathBuf,
        /// Output directory (default: out/<scenario name>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Worker threads; 1 runs sequentially.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Print the derived constants without simulating.
    Resolve { scenario: PathBuf },
    /// Run the assumption checkers only.
    Check { scenario: PathBuf },
}

fn load(path: &Path, dt: Option<f64>, horizon: Option<f64>) -> Result<ResolvedScenario, ScenarioError> {
    let mut sc = Scenario::from_path(path)?;
    if let Some(dt) = dt {
        sc.sim.dt = dt;
    }
    if let Some(h) = horizon {
        sc.sim.horizon = h;
    }
    sc.resolve()
}

fn input_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_INPUT)
}

fn run(path: &Path, out: Option<PathBuf>, dt: Option<f64>, horizon: Option<f64>, parallel: Option<usize>) -> ExitCode {
    let resolved = match load(path, dt, horizon) {
        Ok(r) => r,
        Err(e) => return input_error(e),
    };
    let outcome = match parallel {
        Some(0) => return input_error("--parallel must be at least 1"),
        Some(1) => resolved.run(false),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| resolved.run(true)),
            Err(e) => return input_error(e),
        },
        None => resolved.run(true),
    };

    let dir = out.unwrap_or_else(|| PathBuf::from("out").join(&resolved.name));
    if let Err(e) = fs::create_dir_all(&dir) {
        return input_error(format!("{}: {e}", dir.display()));
    }
    for (i, traj) in outcome.trajectories.iter().enumerate() {
        let Some(traj) = traj else { continue };
        let file = dir.join(format!("traj_{i:03}.csv"));
        let res = File::create(&file)
            .map_err(|e| e.to_string())
            .and_then(|f| write_csv(traj, BufWriter::new(f)).map_err(|e| e.to_string()));
        if let Err(e) = res {
            return input_error(format!("{}: {e}", file.display()));
        }
    }
    let report_path = dir.join("report.json");
    let res = File::create(&report_path)
        .map_err(|e| e.to_string())
        .and_then(|f| serde_json::to_writer_pretty(BufWriter::new(f), &outcome.report).map_err(|e| e.to_string()));
    if let Err(e) = res {
        return input_error(format!("{}: {e}", report_path.display()));
    }

    let rep = &outcome.report;
    println!("scenario {}: {} runs, eta {:.4}", rep.scenario, rep.runs.len(), rep.eta);
    if let Some(eps) = rep.epsilon {
        println!("epsilon {eps:.4}");
    }
    for r in &rep.runs {
        let status = match r.status {
            RunStatus::Pass => "pass",
            RunStatus::MonitorFailure => "FAIL",
            RunStatus::Diverged => "DIVERGED",
        };
        println!(
            "  [{:03}] x0={:?} kappa={:.4} tau={:?} {status}",
            r.index, r.constants.x0, r.constants.kappa, r.tau
        );
        for v in r.verdicts.iter().filter(|v| !v.pass) {
            println!(
                "        {} margin {:.3e} at t={:?}",
                v.name, v.worst_margin, v.worst_time
            );
        }
        if let Some(e) = &r.error {
            println!("        {e}");
        }
    }
    println!("wrote {}", dir.display());
    ExitCode::from(rep.exit_code() as u8)
}

fn resolve(path: &Path) -> ExitCode {
    match load(path, None, None) {
        Ok(r) => {
            let checks = r.check_assumptions(CHECK_GRID, CHECK_TIMES);
            print!("{}", r.describe(&checks));
            ExitCode::SUCCESS
        }
        Err(e) => input_error(e),
    }
}

fn check(path: &Path) -> ExitCode {
    let r = match load(path, None, None) {
        Ok(r) => r,
        Err(e) => return input_error(e),
    };
    let checks = r.check_assumptions(CHECK_GRID, CHECK_TIMES);
    for c in &checks {
        println!(
            "{}: {} ({} samples, {} violations, max {:.6}, min slack {:.6})",
            c.name,
            if c.holds { "holds" } else { "VIOLATED" },
            c.samples,
            c.violations,
            c.max_observed,
            c.min_slack
        );
    }
    if checks.iter().all(|c| c.holds) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_MONITOR)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            dt,
            horizon,
            parallel,
        } => run(&scenario, out, dt, horizon, parallel),
        Command::Resolve { scenario } => resolve(&scenario),
        Command::Check { scenario } => check(&scenario),
    }
}
