use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use descent::analysis::{sweep, MeanAccumulator};
use descent::objective::{finite_difference_gradient, gradient_relative_error, FD_STEP};
use descent::{check_bound, energy_series, fit_rate, BoundConstant, BoundReport, Column, Method, RateFit, Trace};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{parse_seed_range, parse_window, BoundSpec, Experiment, ExperimentFile};
use crate::error::CliError;
use crate::summary::{BoundOutcome, ExperimentSummary, FinalRecord, SeedAbort, SeedRange, Summary, FORMAT_VERSION};

/// Environment variable capping the number of concurrent runs in a sweep.
pub const THREADS_ENV: &str = "DESCENT_THREADS";

/// Largest relative gradient error accepted by `gradcheck`.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Clone, Debug, Default)]
pub struct RunArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub seeds: Option<String>,
    pub overrides: Vec<String>,
    pub coords: bool,
}

/// Loads the experiment file and applies command-line overrides.
pub fn load_config(args: &RunArgs) -> Result<ExperimentFile, CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut file = ExperimentFile::parse(&text)?;
    for o in &args.overrides {
        file.set(o)?;
    }
    if let Some(seed) = args.seed {
        file.set(&format!("run.seed={seed}"))?;
        file.remove("run.seeds");
    }
    if let Some(range) = &args.seeds {
        parse_seed_range(range).map_err(|e| CliError::Config(format!("--seeds: {e}")))?;
        file.set(&format!("run.seeds={range}"))?;
    }
    if args.coords {
        file.set("run.coords=true")?;
    }
    Ok(file)
}

pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Riemannian => "riemannian",
        Method::Momentum => "momentum",
        Method::Stochastic => "stochastic",
    }
}

fn column_name(c: Column) -> &'static str {
    match c {
        Column::FValue => "f_value",
        Column::Gap => "gap",
        Column::GradNorm => "grad_norm",
        Column::Alpha => "alpha",
        Column::Beta => "beta",
        Column::DistToOpt => "dist_to_opt",
    }
}

fn write_trace(path: &Path, trace: &Trace, coords: bool) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    trace.write_csv(&mut out, coords)?;
    out.flush()?;
    Ok(())
}

/// Runs every experiment in the file, writing traces and `summary.json`
/// into `args.out`.
pub fn cmd_run(args: &RunArgs) -> Result<Summary, CliError> {
    let started = Instant::now();
    let file = load_config(args)?;
    let experiments = file.experiments()?;
    let threads = threads_from_env()?;
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", args.out.display())))?;

    let mut summaries = Vec::with_capacity(experiments.len());
    for exp in &experiments {
        summaries.push(run_experiment(exp, &args.out, threads)?);
    }
    let seeds = &experiments[0].seeds;
    let summary = Summary {
        format_version: FORMAT_VERSION,
        config: file.echo(),
        seeds: SeedRange { first: seeds[0], last: *seeds.last().unwrap(), count: seeds.len() },
        experiments: summaries,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(args.out.join("summary.json"), json + "\n")?;

    let aborts: Vec<String> = summary
        .experiments
        .iter()
        .flat_map(|e| {
            e.aborted.iter().map(move |a| format!("{} seed {} at k = {}: {}", e.name, a.seed, a.abort.k, a.abort.reason))
        })
        .collect();
    if !aborts.is_empty() {
        return Err(CliError::Abort(aborts.join("; ")));
    }
    Ok(summary)
}

fn run_experiment(exp: &Experiment, out: &Path, threads: Option<usize>) -> Result<ExperimentSummary, CliError> {
    if exp.analysis.energy && exp.seeds.len() > 1 {
        return Err(CliError::Config(format!("{}: analysis.energy needs a single seed", exp.name)));
    }
    let mut mean = MeanAccumulator::new();
    let mut traces = Vec::new();
    let mut aborted = Vec::new();
    let mut single: Option<Trace> = None;
    let multi = exp.seeds.len() > 1;
    sweep(
        &exp.seeds,
        threads,
        |seed| descent::run(exp.method, &exp.config.clone().with_seed(seed)),
        |trace| {
            let seed = trace.meta.seeds[0];
            if exp.seed_traces {
                let name = format!("{}_seed{seed}.csv", exp.name);
                write_trace(&out.join(&name), &trace, exp.coords).map_err(|e| descent::Error::Io(e.to_string()))?;
                traces.push(name);
            }
            if let Some(abort) = &trace.abort {
                aborted.push(SeedAbort { seed, abort: abort.clone() });
            } else if multi {
                mean.add(&trace)?;
            }
            if !multi {
                single = Some(trace);
            }
            Ok(())
        },
    )?;

    let (result, mean_trace) = match single {
        Some(t) => (Some(t), None),
        None if aborted.is_empty() => {
            let m = mean.finish()?;
            let name = format!("{}_mean.csv", exp.name);
            write_trace(&out.join(&name), &m, false)?;
            (Some(m), Some(name))
        }
        None => (None, None),
    };

    let mut summary = ExperimentSummary {
        name: exp.name.clone(),
        method: method_name(exp.method).into(),
        traces,
        mean_trace,
        iterations: 0,
        final_record: None,
        aborted,
        series: if exp.analysis.energy { "energy".into() } else { column_name(exp.analysis.column).into() },
        fit: None,
        fit_error: None,
        bounds: Vec::new(),
    };
    let Some(trace) = result else {
        return Ok(summary);
    };
    summary.iterations = trace.iterations();
    summary.final_record = trace.last().map(|r| FinalRecord {
        k: r.k,
        f_value: r.f_value,
        gap: r.gap,
        grad_norm: r.grad_norm,
        dist_to_opt: r.dist_to_opt,
    });
    if trace.abort.is_some() {
        return Ok(summary);
    }

    let series = if exp.analysis.energy {
        let x_star = exp.config.objective.known_minimizer().expect("checked when parsing").coords();
        energy_series(&trace, x_star)?
    } else {
        trace.series(exp.analysis.column)
    };
    let window = exp.analysis.window.unwrap_or((1, trace.iterations().max(2)));
    match fit_rate(&series, window) {
        Ok(fit) => summary.fit = Some(fit),
        Err(e) => summary.fit_error = Some(e.to_string()),
    }
    summary.bounds = exp.analysis.bounds.iter().map(|b| bound_outcome(&series, b)).collect();
    Ok(summary)
}

fn bound_outcome(series: &[(usize, f64)], b: &BoundSpec) -> BoundOutcome {
    let spec = match b.constant {
        BoundConstant::Explicit(c) => format!("p={} C={c} anchor={} tol={}", b.exponent, b.anchor, b.tolerance),
        BoundConstant::Anchored => format!("p={} anchor={} tol={}", b.exponent, b.anchor, b.tolerance),
    };
    match check_bound(series, b.exponent, b.constant, b.anchor, b.tolerance) {
        Ok(report) => BoundOutcome { spec, report: Some(report), error: None },
        Err(e) => BoundOutcome { spec, report: None, error: Some(e.to_string()) },
    }
}

pub fn read_trace(path: &Path) -> Result<Trace, CliError> {
    let file = File::open(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Trace::read_csv(BufReader::new(file)).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn parse_column(s: &str) -> Result<Column, CliError> {
    s.parse().map_err(|_| CliError::Config(format!("unknown column `{s}`")))
}

/// Fits `column ≈ C k^{-p}` over `window` (default: the whole trace).
pub fn cmd_fit(trace: &Path, window: Option<&str>, column: &str) -> Result<RateFit, CliError> {
    let t = read_trace(trace)?;
    let column = parse_column(column)?;
    let window = match window {
        Some(w) => parse_window(w).map_err(|e| CliError::Config(format!("--window: {e}")))?,
        None => (1, t.iterations().max(2)),
    };
    Ok(fit_rate(&t.series(column), window)?)
}

#[derive(Clone, Debug, Default)]
pub struct BoundArgs {
    pub p: f64,
    pub constant: Option<f64>,
    pub anchor: Option<usize>,
    pub tol: f64,
    pub column: String,
}

/// Checks `column ≤ C k^{-p}` beyond the anchor. With an explicit `C` the
/// anchor defaults to 0 (every iterate is checked); otherwise `C` is
/// calibrated at the anchor, which defaults to 10.
pub fn cmd_check_bound(trace: &Path, args: &BoundArgs) -> Result<BoundReport, CliError> {
    let t = read_trace(trace)?;
    let column = parse_column(&args.column)?;
    let (mode, anchor) = match args.constant {
        Some(c) => (BoundConstant::Explicit(c), args.anchor.unwrap_or(0)),
        None => (BoundConstant::Anchored, args.anchor.unwrap_or(descent::analysis::DEFAULT_ANCHOR)),
    };
    Ok(check_bound(&t.series(column), args.p, mode, anchor, args.tol)?)
}

#[derive(Clone, Debug, Default)]
pub struct GradcheckArgs {
    pub config: Option<PathBuf>,
    pub objective: Option<String>,
    pub a: Option<String>,
    pub b: Option<String>,
    pub dim: Option<usize>,
    pub samples: usize,
    pub seed: u64,
    pub perturb: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub objective: String,
    pub samples: usize,
    pub seed: u64,
    pub step: f64,
    pub perturb: f64,
    pub max_relative_error: f64,
    pub worst_point: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares analytic and central-difference ambient gradients at random
/// points. `perturb` corrupts the analytic gradient, as a negative control.
pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<GradcheckReport, CliError> {
    let file = match &args.config {
        Some(path) => {
            if args.objective.is_some() || args.a.is_some() || args.b.is_some() || args.dim.is_some() {
                return Err(CliError::Config("give either --config or an objective description".into()));
            }
            load_config(&RunArgs { config: path.clone(), ..Default::default() })?
        }
        None => {
            let mut file = ExperimentFile::default();
            let kind = args.objective.as_deref().ok_or_else(|| CliError::Config("--objective or --config is required".into()))?;
            file.set(&format!("objective.kind={kind}"))?;
            if let Some(a) = &args.a {
                file.set(&format!("quadratic.A={a}"))?;
            }
            if let Some(b) = &args.b {
                file.set(&format!("quadratic.b={b}"))?;
            }
            if let Some(d) = args.dim {
                file.set(&format!("objective.dim={d}"))?;
            }
            file
        }
    };
    let f = file.objective()?;
    if args.samples == 0 {
        return Err(CliError::Config("--samples must be positive".into()));
    }
    if !args.perturb.is_finite() {
        return Err(CliError::Config("--perturb must be finite".into()));
    }
    let m = f.natural_manifold();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut worst = (f64::NEG_INFINITY, Vec::new());
    for _ in 0..args.samples {
        let x = m.random_point(&mut rng, 3.0);
        let mut analytic = f.euclidean_gradient(&x)?;
        if args.perturb != 0.0 {
            analytic[0] += args.perturb * analytic.amax().max(1.0);
        }
        let numeric = finite_difference_gradient(&f, x.coords(), FD_STEP);
        let err = gradient_relative_error(&analytic, &numeric);
        if err > worst.0 {
            worst = (err, x.coords().as_slice().to_vec());
        }
    }
    Ok(GradcheckReport {
        objective: file.get("objective.kind").unwrap_or_default().to_string(),
        samples: args.samples,
        seed: args.seed,
        step: FD_STEP,
        perturb: args.perturb,
        max_relative_error: worst.0,
        worst_point: worst.1,
        tolerance: GRADCHECK_TOLERANCE,
        passed: worst.0 <= GRADCHECK_TOLERANCE,
    })
}
