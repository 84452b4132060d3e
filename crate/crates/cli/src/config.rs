//! Experiment files.
//!
//! ```text
//! # comment
//! [objective]
//! kind = quadratic
//! [quadratic]
//! A = 4 1; 1 3
//! b = 1 2
//! [schedule]
//! alpha = fixed 0.25
//! [run]
//! x0 = 0 0
//! max_iters = 9
//!
//! [variant adaptive]
//! schedule.alpha = exact_line_search
//! schedule.beta = step_ratio
//! ```
//!
//! Keys inside a section are relative to it; dotted keys are absolute and
//! may appear anywhere. A `[variant NAME]` section holds dotted overrides of
//! the base settings, and each variant runs as its own experiment. Unknown
//! sections and keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use descent::optimize::check_sgd_schedule;
use descent::{
    BoundConstant, Column, Manifold, Method, Momentum, NoiseFamily, NoiseSpec, Objective, Point, RunConfig,
    ScheduleSpec, StepRule, StepSize,
};
use nalgebra::{DMatrix, DVector};

use crate::error::CliError;

/// Sections in echo order.
pub const SECTIONS: [&str; 7] = ["objective", "quadratic", "manifold", "schedule", "noise", "run", "analysis"];

pub const KEYS: [&str; 25] = [
    "objective.kind",
    "objective.dim",
    "objective.lipschitz",
    "quadratic.A",
    "quadratic.b",
    "manifold.kind",
    "schedule.alpha",
    "schedule.beta",
    "noise.family",
    "noise.moment_order",
    "noise.override",
    "run.method",
    "run.step_rule",
    "run.x0",
    "run.x0_polar_angle",
    "run.max_iters",
    "run.grad_tol",
    "run.seed",
    "run.seeds",
    "run.coords",
    "run.seed_traces",
    "analysis.column",
    "analysis.window",
    "analysis.bound",
    "analysis.energy",
];

type Table = BTreeMap<String, String>;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExperimentFile {
    base: Table,
    variants: Vec<(String, Table)>,
}

fn config_err(line: usize, message: impl Into<String>) -> CliError {
    CliError::Config(format!("line {line}: {}", message.into()))
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut file = ExperimentFile::default();
        // None: before any section; Some(Ok(s)): plain section; Some(Err(i)): variant i
        let mut current: Option<Result<&str, usize>> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('[') {
                let header = header
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(line_no, format!("malformed section header `{line}`")))?
                    .trim();
                if let Some(name) = header.strip_prefix("variant") {
                    let name = name.trim();
                    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                        return Err(config_err(line_no, format!("bad variant name `{name}`")));
                    }
                    if file.variants.iter().any(|(n, _)| n == name) {
                        return Err(config_err(line_no, format!("duplicate variant `{name}`")));
                    }
                    file.variants.push((name.to_string(), Table::new()));
                    current = Some(Err(file.variants.len() - 1));
                } else {
                    let section = SECTIONS
                        .iter()
                        .find(|s| **s == header)
                        .ok_or_else(|| config_err(line_no, format!("unknown section `[{header}]`")))?;
                    current = Some(Ok(section));
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(line_no, format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), normalize(value));
            let full = if key.contains('.') {
                key.to_string()
            } else {
                match current {
                    Some(Ok(section)) => format!("{section}.{key}"),
                    Some(Err(_)) => {
                        return Err(config_err(line_no, format!("keys in a variant must be dotted, got `{key}`")))
                    }
                    None => return Err(config_err(line_no, format!("key `{key}` outside any section"))),
                }
            };
            if !KEYS.contains(&full.as_str()) {
                return Err(config_err(line_no, format!("unknown key `{full}`")));
            }
            let table = match current {
                Some(Err(i)) => &mut file.variants[i].1,
                _ => &mut file.base,
            };
            if table.insert(full.clone(), value).is_some() {
                return Err(config_err(line_no, format!("duplicate key `{full}`")));
            }
        }
        Ok(file)
    }

    /// Sets a base key, as given by `--override key=value`.
    pub fn set(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!("override: unknown key `{key}`")));
        }
        self.base.insert(key.to_string(), normalize(value));
        Ok(())
    }

    pub fn remove(&mut self, key: &str) {
        self.base.remove(key);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.base.get(key).map(String::as_str)
    }

    /// Canonical text; parses back to an equal file.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for section in SECTIONS {
            let prefix = format!("{section}.");
            let entries: Vec<_> = self.base.iter().filter(|(k, _)| k.starts_with(&prefix)).collect();
            if entries.is_empty() {
                continue;
            }
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "[{section}]");
            for (k, v) in entries {
                let _ = writeln!(out, "{} = {v}", &k[prefix.len()..]);
            }
        }
        for (name, table) in &self.variants {
            let _ = writeln!(out, "\n[variant {name}]");
            for (k, v) in table {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    /// The objective described by the base settings.
    pub fn objective(&self) -> Result<Objective, CliError> {
        build_objective(&Reader { table: &self.base })
    }

    /// One experiment per variant, or a single experiment named `trace`.
    pub fn experiments(&self) -> Result<Vec<Experiment>, CliError> {
        if self.variants.is_empty() {
            return Ok(vec![Experiment::build("trace", &self.base)?]);
        }
        self.variants
            .iter()
            .map(|(name, overrides)| {
                let mut merged = self.base.clone();
                merged.extend(overrides.iter().map(|(k, v)| (k.clone(), v.clone())));
                Experiment::build(name, &merged).map_err(|e| e.in_variant(name))
            })
            .collect()
    }
}

fn normalize(value: &str) -> String {
    value.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundSpec {
    pub exponent: f64,
    pub constant: BoundConstant,
    pub anchor: usize,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisSpec {
    pub column: Column,
    /// Energy instead of a trace column.
    pub energy: bool,
    pub window: Option<(usize, usize)>,
    pub bounds: Vec<BoundSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub method: Method,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub coords: bool,
    pub seed_traces: bool,
    pub analysis: AnalysisSpec,
}

struct Reader<'a> {
    table: &'a Table,
}

impl<'a> Reader<'a> {
    fn raw(&self, key: &str) -> Option<&'a str> {
        self.table.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|_| CliError::Config(format!("{key}: cannot parse `{v}`"))))
            .transpose()
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, CliError> {
        self.raw(key)
            .map(|v| match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(CliError::Config(format!("{key}: expected true or false, got `{v}`"))),
            })
            .transpose()
    }

    fn vector(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.raw(key).map(|v| parse_vector(v).map_err(|e| CliError::Config(format!("{key}: {e}")))).transpose()
    }
}

pub fn parse_number(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("cannot parse `{s}` as a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v)
}

pub fn parse_vector(s: &str) -> Result<Vec<f64>, String> {
    s.split_whitespace().map(parse_number).collect()
}

/// Rows separated by `;`, entries by whitespace.
pub fn parse_matrix(s: &str) -> Result<DMatrix<f64>, String> {
    let rows: Vec<Vec<f64>> = s.split(';').map(parse_vector).collect::<Result<_, _>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != rows[0].len()) || rows[0].is_empty() {
        return Err("matrix rows must be non-empty and of equal length".into());
    }
    Ok(DMatrix::from_row_iterator(n, rows[0].len(), rows.into_iter().flatten()))
}

/// `A..B` (inclusive) or a single integer.
pub fn parse_seed_range(s: &str) -> Result<Vec<u64>, String> {
    let bad = || format!("expected a seed or a range A..B, got `{s}`");
    match s.split_once("..") {
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if b < a {
                return Err(format!("empty seed range `{s}`"));
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![s.trim().parse().map_err(|_| bad())?]),
    }
}

/// `lo:hi`.
pub fn parse_window(s: &str) -> Result<(usize, usize), String> {
    let bad = || format!("expected a window lo:hi, got `{s}`");
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let lo: usize = a.trim().parse().map_err(|_| bad())?;
    let hi: usize = b.trim().parse().map_err(|_| bad())?;
    if lo < 1 || hi <= lo {
        return Err(format!("window `{s}` needs 1 <= lo < hi"));
    }
    Ok((lo, hi))
}

type Call<'a> = (&'a str, Vec<(&'a str, &'a str)>);

/// Splits `word k=v k=v` into the word and its named parameters.
fn parse_call(s: &str) -> Result<Call<'_>, String> {
    let mut parts = s.split_whitespace();
    let head = parts.next().ok_or("empty value")?;
    let args = parts
        .map(|p| p.split_once('=').ok_or_else(|| format!("expected name=value, got `{p}`")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((head, args))
}

fn named(args: &[(&str, &str)], allowed: &[&str]) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (k, v) in args {
        if !allowed.contains(k) {
            return Err(format!("unknown parameter `{k}` (expected one of {})", allowed.join(", ")));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(format!("parameter `{k}` given twice"));
        }
    }
    Ok(out)
}

/// A number, or `1/L` for the reciprocal Lipschitz constant.
fn scalar(s: &str, lipschitz: Option<f64>) -> Result<f64, String> {
    if s == "1/L" {
        return lipschitz.map(|l| 1.0 / l).ok_or_else(|| "`1/L` needs a known Lipschitz constant".to_string());
    }
    parse_number(s)
}

fn required<'m>(map: &'m BTreeMap<String, String>, name: &str) -> Result<&'m str, String> {
    map.get(name).map(String::as_str).ok_or_else(|| format!("missing parameter `{name}`"))
}

/// `fixed V` or `fixed value=V`.
fn fixed_value(s: &str) -> Result<&str, String> {
    match s.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["fixed", v] => Ok(v.strip_prefix("value=").unwrap_or(v)),
        _ => Err(format!("expected `fixed VALUE`, got `{s}`")),
    }
}

pub fn parse_step_size(s: &str, lipschitz: Option<f64>) -> Result<StepSize, String> {
    if s.split_whitespace().next() == Some("fixed") {
        return Ok(StepSize::Fixed(scalar(fixed_value(s)?, lipschitz)?));
    }
    let (head, args) = parse_call(s)?;
    match head {
        "powerlaw" => {
            let m = named(&args, &["c", "gamma"])?;
            Ok(StepSize::PowerLaw {
                c: scalar(required(&m, "c")?, lipschitz)?,
                gamma: parse_number(required(&m, "gamma")?)?,
            })
        }
        "exact_line_search" if args.is_empty() => Ok(StepSize::ExactLineSearch),
        _ => Err(format!("unknown step size `{s}` (fixed, powerlaw, exact_line_search)")),
    }
}

pub fn parse_momentum(s: &str) -> Result<Momentum, String> {
    let (head, args) = parse_call(s)?;
    match head {
        "zero" if args.is_empty() => Ok(Momentum::Zero),
        "powerlaw" => {
            let m = named(&args, &["d", "gamma"])?;
            Ok(Momentum::PowerLaw { d: parse_number(required(&m, "d")?)?, gamma: parse_number(required(&m, "gamma")?)? })
        }
        "step_ratio" if args.is_empty() => Ok(Momentum::StepRatio),
        _ => Err(format!("unknown momentum `{s}` (zero, powerlaw, step_ratio)")),
    }
}

pub fn parse_noise_family(s: &str) -> Result<NoiseFamily, String> {
    let (head, args) = parse_call(s)?;
    match head {
        "zero" if args.is_empty() => Ok(NoiseFamily::Zero),
        "uniform" => {
            let m = named(&args, &["a"])?;
            Ok(NoiseFamily::Uniform { half_width: parse_number(required(&m, "a")?)? })
        }
        "student_t" => {
            let m = named(&args, &["nu", "s"])?;
            let scale = m.get("s").map(|s| parse_number(s)).transpose()?.unwrap_or(1.0);
            Ok(NoiseFamily::StudentT { dof: parse_number(required(&m, "nu")?)?, scale })
        }
        _ => Err(format!("unknown noise family `{s}` (zero, uniform a=.., student_t nu=.. s=..)")),
    }
}

/// `p=1 C=4.93 anchor=11 tol=0`; without `C` the constant is anchored.
pub fn parse_bound(s: &str) -> Result<BoundSpec, String> {
    let args: Vec<(&str, &str)> = s
        .split_whitespace()
        .map(|p| p.split_once('=').ok_or_else(|| format!("expected name=value, got `{p}`")))
        .collect::<Result<_, _>>()?;
    let m = named(&args, &["p", "C", "anchor", "tol"])?;
    let anchor = match m.get("anchor") {
        Some(a) => a.parse().map_err(|_| format!("bad anchor `{a}`"))?,
        None => descent::analysis::DEFAULT_ANCHOR,
    };
    Ok(BoundSpec {
        exponent: parse_number(required(&m, "p")?)?,
        constant: match m.get("C") {
            Some(c) => BoundConstant::Explicit(parse_number(c)?),
            None => BoundConstant::Anchored,
        },
        anchor,
        tolerance: m.get("tol").map(|t| parse_number(t)).transpose()?.unwrap_or(0.0),
    })
}

fn parse_method(s: &str) -> Result<Method, String> {
    match s {
        "riemannian" => Ok(Method::Riemannian),
        "momentum" => Ok(Method::Momentum),
        "stochastic" => Ok(Method::Stochastic),
        _ => Err(format!("unknown method `{s}` (riemannian, momentum, stochastic)")),
    }
}

fn parse_step_rule(s: &str) -> Result<StepRule, String> {
    match s {
        "expmap" => Ok(StepRule::ExpMap),
        "normalize" => Ok(StepRule::NormalizeRetract),
        "ambient" => Ok(StepRule::Ambient),
        _ => Err(format!("unknown step rule `{s}` (expmap, normalize, ambient)")),
    }
}

/// Builds the objective described by the `objective.*` and `quadratic.*` keys.
fn build_objective(r: &Reader) -> Result<Objective, CliError> {
    let kind = r.raw("objective.kind").ok_or_else(|| CliError::Config("objective.kind is required".into()))?;
    let dim: Option<usize> = r.parse("objective.dim")?;
    let objective = match kind {
        "sphere_height" => Objective::sphere_height(dim.unwrap_or(3)),
        "half_square" => Objective::half_square(dim.unwrap_or(1)),
        "quadratic" => {
            let a = r.raw("quadratic.A").ok_or_else(|| CliError::Config("quadratic.A is required".into()))?;
            let a = parse_matrix(a).map_err(|e| CliError::Config(format!("quadratic.A: {e}")))?;
            let b = match r.vector("quadratic.b")? {
                Some(b) => DVector::from_vec(b),
                None => DVector::zeros(a.nrows()),
            };
            if dim.is_some_and(|d| d != b.len()) {
                return Err(CliError::Config(format!("objective.dim = {} but quadratic.b has {} entries", dim.unwrap(), b.len())));
            }
            Objective::quadratic(a, b)
        }
        other => {
            return Err(CliError::Config(format!(
                "objective.kind: unknown objective `{other}` (sphere_height, quadratic, half_square)"
            )))
        }
    };
    let mut objective = objective.map_err(|e| CliError::Config(format!("objective: {e}")))?;
    if let Some(l) = r.parse::<f64>("objective.lipschitz")? {
        objective = objective.with_lipschitz(l).map_err(|e| CliError::Config(format!("objective.lipschitz: {e}")))?;
    }
    for key in ["quadratic.A", "quadratic.b"] {
        if kind != "quadratic" && r.raw(key).is_some() {
            return Err(CliError::Config(format!("{key} is only valid with objective.kind = quadratic")));
        }
    }
    Ok(objective)
}

fn build_start(r: &Reader, manifold: Manifold) -> Result<Point, CliError> {
    let n = manifold.ambient_dim();
    let coords = match (r.vector("run.x0")?, r.parse::<f64>("run.x0_polar_angle")?) {
        (Some(_), Some(_)) => return Err(CliError::Config("give run.x0 or run.x0_polar_angle, not both".into())),
        (Some(x), None) => DVector::from_vec(x),
        (None, Some(theta)) => {
            if !manifold.is_sphere() {
                return Err(CliError::Config("run.x0_polar_angle needs a sphere".into()));
            }
            let mut x = DVector::zeros(n);
            x[0] = theta.sin();
            x[n - 1] = theta.cos();
            x
        }
        (None, None) if !manifold.is_sphere() => DVector::zeros(n),
        (None, None) => return Err(CliError::Config("run.x0 or run.x0_polar_angle is required on the sphere".into())),
    };
    manifold.point(coords).map_err(|e| CliError::Config(format!("run.x0: {e}")))
}

impl Experiment {
    fn build(name: &str, table: &Table) -> Result<Experiment, CliError> {
        let r = Reader { table };
        let objective = build_objective(&r)?;
        let lipschitz = objective.known_lipschitz();
        let natural = objective.natural_manifold();
        let manifold = match r.raw("manifold.kind") {
            None => natural,
            Some("euclidean") => Manifold::Euclidean { dim: natural.ambient_dim() },
            Some("sphere") => Manifold::sphere(natural.ambient_dim()).map_err(|e| CliError::Config(format!("manifold.kind: {e}")))?,
            Some(other) => return Err(CliError::Config(format!("manifold.kind: unknown manifold `{other}` (euclidean, sphere)"))),
        };

        let alpha = r.raw("schedule.alpha").ok_or_else(|| CliError::Config("schedule.alpha is required".into()))?;
        let alpha = parse_step_size(alpha, lipschitz).map_err(|e| CliError::Config(format!("schedule.alpha: {e}")))?;
        let beta = match r.raw("schedule.beta") {
            Some(b) => parse_momentum(b).map_err(|e| CliError::Config(format!("schedule.beta: {e}")))?,
            None => Momentum::Zero,
        };
        let schedule = ScheduleSpec::new(alpha, beta).map_err(|e| CliError::Config(format!("schedule: {e}")))?;

        let dim = manifold.ambient_dim();
        let noise = match r.raw("noise.family") {
            Some(f) => {
                let family = parse_noise_family(f).map_err(|e| CliError::Config(format!("noise.family: {e}")))?;
                let order = match r.parse::<f64>("noise.moment_order")? {
                    Some(q) => q,
                    None => match family {
                        NoiseFamily::StudentT { dof, .. } => 0.5 * (2.0 + dof),
                        _ => 4.0,
                    },
                };
                Some(NoiseSpec::new(family, order, dim).map_err(|e| CliError::Config(format!("noise: {e}")))?)
            }
            None if r.raw("noise.moment_order").is_some() => {
                return Err(CliError::Config("noise.moment_order needs noise.family".into()))
            }
            None => None,
        };
        let noise_override = r.vector("noise.override")?;

        let method = match r.raw("run.method") {
            Some(m) => parse_method(m).map_err(|e| CliError::Config(format!("run.method: {e}")))?,
            None if noise.is_some() || noise_override.is_some() => Method::Stochastic,
            None if beta != Momentum::Zero => Method::Momentum,
            None => Method::Riemannian,
        };
        let step_rule = match r.raw("run.step_rule") {
            Some(s) => parse_step_rule(s).map_err(|e| CliError::Config(format!("run.step_rule: {e}")))?,
            None => StepRule::ExpMap,
        };

        let x0 = build_start(&r, manifold)?;
        let mut config = RunConfig::new(objective, x0, schedule).with_step_rule(step_rule);
        config.manifold = manifold;
        config.noise = noise;
        config.noise_override = noise_override;
        if let Some(n) = r.parse::<usize>("run.max_iters")? {
            config.max_iters = n;
        }
        if let Some(tol) = r.parse::<f64>("run.grad_tol")? {
            config.grad_tol = tol;
        }
        let seed = r.parse::<u64>("run.seed")?.unwrap_or(0);
        let seeds = match r.raw("run.seeds") {
            Some(s) => parse_seed_range(s).map_err(|e| CliError::Config(format!("run.seeds: {e}")))?,
            None => vec![seed],
        };
        config.seed = seeds[0];
        config.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if method == Method::Stochastic {
            check_sgd_schedule(&config.schedule).map_err(|e| CliError::Config(e.to_string()))?;
        }

        let column = match r.raw("analysis.column") {
            Some(c) => c.parse().map_err(|_| CliError::Config(format!("analysis.column: unknown column `{c}`")))?,
            None => Column::Gap,
        };
        let window = r
            .raw("analysis.window")
            .map(|w| parse_window(w).map_err(|e| CliError::Config(format!("analysis.window: {e}"))))
            .transpose()?;
        let bounds = match r.raw("analysis.bound") {
            Some(b) => b
                .split(';')
                .map(|s| parse_bound(s).map_err(|e| CliError::Config(format!("analysis.bound: {e}"))))
                .collect::<Result<_, _>>()?,
            None => Vec::new(),
        };
        let energy = r.bool("analysis.energy")?.unwrap_or(false);
        if energy && config.objective.known_minimizer().is_none() {
            return Err(CliError::Config("analysis.energy needs a known minimizer".into()));
        }

        Ok(Experiment {
            name: name.to_string(),
            method,
            config,
            seeds,
            coords: r.bool("run.coords")?.unwrap_or(false),
            seed_traces: r.bool("run.seed_traces")?.unwrap_or(true),
            analysis: AnalysisSpec { column, energy, window, bounds },
        })
    }
}
