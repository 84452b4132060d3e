use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use descent_cli::commands::{
    cmd_check_bound, cmd_fit, cmd_gradcheck, cmd_run, BoundArgs, GradcheckArgs, RunArgs,
};
use descent_cli::CliError;

/// Steepest-descent experiments: run configurations, fit rates, check bounds.
///
/// Exit codes: 0 success, 1 check failed, 2 configuration or input error,
/// 3 numerical abort.
#[derive(Parser)]
#[command(name = "descent", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file and write traces plus summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run a single seed.
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        /// Run seeds A..B (inclusive).
        #[arg(long)]
        seeds: Option<String>,
        /// Set a configuration key, e.g. `run.max_iters=100`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Add x_0.. coordinate columns to per-seed traces.
        #[arg(long)]
        coords: bool,
    },
    /// Fit a power law to one trace column; prints JSON.
    Fit {
        trace: PathBuf,
        /// Iteration window lo:hi.
        #[arg(long)]
        window: Option<String>,
        #[arg(long, default_value = "gap")]
        column: String,
    },
    /// Check a column against C / k^p; exit 1 if violated.
    CheckBound {
        trace: PathBuf,
        #[arg(long)]
        p: f64,
        /// Explicit constant; without it C is calibrated at the anchor.
        #[arg(long = "C")]
        c: Option<f64>,
        #[arg(long)]
        anchor: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
        #[arg(long, default_value = "gap")]
        column: String,
    },
    /// Compare analytic gradients with central differences; exit 1 on mismatch.
    Gradcheck {
        /// Take the objective from an experiment file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// sphere_height, quadratic or half_square.
        #[arg(long)]
        objective: Option<String>,
        /// Quadratic matrix, rows separated by `;`.
        #[arg(long = "A")]
        a: Option<String>,
        #[arg(long = "b")]
        b: Option<String>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Add this relative error to the analytic gradient (negative control).
        #[arg(long, default_value_t = 0.0)]
        perturb: f64,
    },
}

fn print_json<T: serde::Serialize>(value: &T) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, out, seed, seeds, overrides, coords } => {
            let summary = cmd_run(&RunArgs { config, out: out.clone(), seed, seeds, overrides, coords })?;
            for e in &summary.experiments {
                eprintln!("{}: {} iterations, {} trace files", e.name, e.iterations, e.traces.len());
            }
            eprintln!("wrote {}", out.join("summary.json").display());
            Ok(())
        }
        Command::Fit { trace, window, column } => {
            print_json(&cmd_fit(&trace, window.as_deref(), &column)?);
            Ok(())
        }
        Command::CheckBound { trace, p, c, anchor, tol, column } => {
            let report = cmd_check_bound(&trace, &BoundArgs { p, constant: c, anchor, tol, column })?;
            print_json(&report);
            if report.satisfied {
                Ok(())
            } else {
                Err(CliError::Check(format!("bound violated; worst k = {}, ratio {:e}", report.worst_k, report.worst_ratio)))
            }
        }
        Command::Gradcheck { config, objective, a, b, dim, samples, seed, perturb } => {
            let report = cmd_gradcheck(&GradcheckArgs { config, objective, a, b, dim, samples, seed, perturb })?;
            print_json(&report);
            if report.passed {
                Ok(())
            } else {
                Err(CliError::Check(format!("gradient mismatch: relative error {:e}", report.max_relative_error)))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version exit 0, usage errors 2
            return ExitCode::from(e.exit_code().clamp(0, 2) as u8);
        }
    };
    // A panic is reported like a numerical abort so that only the documented
    // exit codes are observable.
    match std::panic::catch_unwind(|| dispatch(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => ExitCode::from(3),
    }
}
