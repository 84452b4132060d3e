//! Steepest-descent iterations.
//!
//! * [`run_rgd`]: Riemannian descent `x_{k+1} = exp_{x_k}(−α_k ∇f(x_k))`,
//!   or the add-and-normalize retraction in place of `exp`.
//! * [`run_momentum`]: `x_{k+1} = x_k − α_k ∇f(x_k) + β_k (x_k − x_{k−1})`
//!   on Euclidean space.
//! * [`run_sgd`]: `x_{k+1} = x_k − α_k (∇f(x_k) + ξ_k)` with seeded noise.
//!
//! Steps are numbered from 1 and the schedules are evaluated at the step
//! number, so the first step uses `α_1`. Before the first step the missing
//! history is filled with the start point (`x_{−1} = x_0`), which makes the
//! first momentum term vanish.

mod schedule;

pub use schedule::{
    exact_line_search_quadratic, momentum_ratio_beta, validate_schedule, Momentum, ScheduleReport, ScheduleSpec,
    StepSize,
};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::analysis::{Record, Trace, TraceMeta};
use crate::error::{Error, Result};
use crate::manifold::{raw_point, Manifold, Point, Tangent};
use crate::noise::{NoiseSpec, RngState};
use crate::objective::{Objective, ObjectiveKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    /// Move along the geodesic.
    ExpMap,
    /// `(x + t) / |x + t|` on the sphere.
    NormalizeRetract,
    /// `x + t`; Euclidean space only.
    Ambient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Riemannian,
    Momentum,
    Stochastic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub objective: Objective,
    pub manifold: Manifold,
    pub x0: Point,
    pub schedule: ScheduleSpec,
    pub step_rule: StepRule,
    pub noise: Option<NoiseSpec>,
    /// Fixed noise sequence, consumed `dim` values per step, used instead of
    /// sampling. Lets printed noise sequences be replayed exactly.
    pub noise_override: Option<Vec<f64>>,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once `|∇f| ≤ grad_tol`. Zero disables the test.
    pub grad_tol: f64,
}

impl RunConfig {
    /// Defaults: manifold of `x0`, exponential-map steps, no noise, seed 0,
    /// 1000 iterations, no gradient tolerance.
    pub fn new(objective: Objective, x0: Point, schedule: ScheduleSpec) -> Self {
        RunConfig {
            manifold: x0.manifold(),
            objective,
            x0,
            schedule,
            step_rule: StepRule::ExpMap,
            noise: None,
            noise_override: None,
            seed: 0,
            max_iters: 1000,
            grad_tol: 0.0,
        }
    }

    pub fn with_step_rule(mut self, rule: StepRule) -> Self {
        self.step_rule = rule;
        self
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn with_noise_override(mut self, values: Vec<f64>) -> Self {
        self.noise_override = Some(values);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn with_grad_tol(mut self, tol: f64) -> Self {
        self.grad_tol = tol;
        self
    }

    /// Seed-independent description, used to check that traces are comparable.
    pub fn fingerprint(&self) -> String {
        format!(
            "{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{}|{:e}",
            self.objective.kind(),
            self.manifold,
            self.x0.coords().as_slice(),
            self.schedule,
            self.step_rule,
            self.noise,
            self.noise_override,
            self.max_iters,
            self.grad_tol
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.x0.manifold() != self.manifold {
            return Err(Error::InvalidConfig(format!("x0 lies on {}, run is on {}", self.x0.manifold(), self.manifold)));
        }
        let dim = self.objective.natural_manifold().ambient_dim();
        if self.manifold.ambient_dim() != dim {
            return Err(Error::InvalidConfig(format!(
                "objective has dimension {dim}, manifold has {}",
                self.manifold.ambient_dim()
            )));
        }
        if self.step_rule == StepRule::Ambient && self.manifold.is_sphere() {
            return Err(Error::InvalidConfig("ambient steps are only defined on euclidean space".into()));
        }
        if self.schedule.alpha == StepSize::ExactLineSearch
            && !(matches!(self.objective.kind(), ObjectiveKind::Quadratic { .. }) && !self.manifold.is_sphere())
        {
            return Err(Error::InvalidConfig(
                "exact line search needs a quadratic objective on euclidean space".into(),
            ));
        }
        if !(self.grad_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("grad_tol must be >= 0, got {}", self.grad_tol)));
        }
        if let Some(noise) = &self.noise {
            if noise.dim() != dim {
                return Err(Error::InvalidConfig(format!("noise has dimension {}, objective has {dim}", noise.dim())));
            }
        }
        if let Some(values) = &self.noise_override {
            if values.len() < self.max_iters * dim {
                return Err(Error::InvalidConfig(format!(
                    "noise override holds {} values, {} steps of dimension {dim} need {}",
                    values.len(),
                    self.max_iters,
                    self.max_iters * dim
                )));
            }
        }
        Ok(())
    }

    fn meta(&self) -> TraceMeta {
        TraceMeta { config: self.fingerprint(), seeds: vec![self.seed] }
    }
}

/// Builds trace records for one objective.
struct Recorder<'a> {
    objective: &'a Objective,
    x_star: Option<&'a Point>,
    f_star: Option<f64>,
}

impl<'a> Recorder<'a> {
    /// The known minimizer only counts if it lies on the run's manifold.
    fn new(objective: &'a Objective, manifold: Manifold) -> Self {
        let x_star = objective.known_minimizer().filter(|p| p.manifold() == manifold);
        Recorder { objective, x_star, f_star: x_star.and_then(|p| objective.eval(p).ok()) }
    }

    fn record(&self, k: usize, x: &Point, grad: &Tangent, alpha: f64, beta: f64, xi: Option<DVector<f64>>) -> Result<Record> {
        let f_value = self.objective.eval(x)?;
        let dist_to_opt = self.x_star.map(|m| x.distance(m)).transpose()?;
        Ok(Record {
            k,
            x: Some(x.coords().clone()),
            f_value,
            gap: self.f_star.map(|fs| f_value - fs),
            grad_norm: grad.norm(),
            alpha,
            beta,
            xi,
            dist_to_opt,
        })
    }
}

fn require_step(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidSchedule(format!("step size must be positive, got {alpha}")));
    }
    Ok(())
}

fn require_euclidean(x: &Point, what: &str) -> Result<()> {
    if x.manifold().is_sphere() {
        return Err(Error::InvalidConfig(format!("{what} is only defined on euclidean space")));
    }
    Ok(())
}

/// One Riemannian descent step. A zero gradient returns `x` unchanged.
pub fn rgd_step(f: &Objective, x: &Point, alpha: f64, rule: StepRule) -> Result<Point> {
    require_step(alpha)?;
    let g = f.riemannian_gradient(x)?;
    step_along(x, &g, alpha, rule)
}

fn step_along(x: &Point, grad: &Tangent, alpha: f64, rule: StepRule) -> Result<Point> {
    if grad.is_zero() {
        return Ok(x.clone());
    }
    let t = grad.scaled(-alpha);
    match rule {
        StepRule::ExpMap => x.exp_map(&t),
        StepRule::NormalizeRetract => x.retract_normalize(&t),
        StepRule::Ambient => {
            require_euclidean(x, "an ambient step")?;
            Ok(raw_point(x.manifold(), x.coords() + t.coords()))
        }
    }
}

/// `x − α ∇f(x) + β (x − x_prev)`. With `β = 0` this is exactly the ambient
/// gradient step.
pub fn momentum_step(f: &Objective, x: &Point, x_prev: &Point, alpha: f64, beta: f64) -> Result<Point> {
    require_euclidean(x, "momentum descent")?;
    if x_prev.manifold() != x.manifold() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: x_prev.dim() });
    }
    let g = f.euclidean_gradient(x)?;
    Ok(momentum_update(x, x_prev, &g, alpha, beta))
}

fn momentum_update(x: &Point, x_prev: &Point, g: &DVector<f64>, alpha: f64, beta: f64) -> Point {
    let mut next = x.coords() + g * -alpha;
    if beta != 0.0 {
        next += (x.coords() - x_prev.coords()) * beta;
    }
    raw_point(x.manifold(), next)
}

/// `x − α (∇f(x) + ξ)`.
pub fn sgd_step(f: &Objective, x: &Point, alpha: f64, xi: &DVector<f64>) -> Result<Point> {
    require_euclidean(x, "stochastic descent")?;
    if xi.len() != x.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: xi.len() });
    }
    let g = f.euclidean_gradient(x)?;
    let next = x.coords() - (g + xi) * alpha;
    Ok(raw_point(x.manifold(), next))
}

/// Runs `method` on `cfg`.
pub fn run(method: Method, cfg: &RunConfig) -> Result<Trace> {
    match method {
        Method::Riemannian => run_rgd(cfg),
        Method::Momentum => run_momentum(cfg),
        Method::Stochastic => run_sgd(cfg),
    }
}

fn step_size(cfg: &RunConfig, k: usize, x: &Point, grad: &Tangent) -> Result<f64> {
    match cfg.schedule.alpha.at(k) {
        Some(a) => Ok(a),
        None => match cfg.objective.kind() {
            // At an exact critical point every step size gives the same iterate.
            ObjectiveKind::Quadratic { .. } if grad.is_zero() => Ok(0.0),
            ObjectiveKind::Quadratic { a, b } => exact_line_search_quadratic(a, b, x.coords()),
            _ => Err(Error::InvalidConfig("exact line search needs a quadratic objective".into())),
        },
    }
}

fn should_stop(cfg: &RunConfig, grad: &Tangent) -> bool {
    cfg.grad_tol > 0.0 && grad.norm() <= cfg.grad_tol
}

/// Riemannian steepest descent with the configured step rule.
pub fn run_rgd(cfg: &RunConfig) -> Result<Trace> {
    cfg.validate()?;
    if cfg.noise.is_some() || cfg.noise_override.is_some() {
        return Err(Error::InvalidConfig("riemannian descent is deterministic; remove the noise spec".into()));
    }
    if cfg.schedule.beta != Momentum::Zero {
        return Err(Error::InvalidConfig("riemannian descent takes no momentum; set beta to zero".into()));
    }
    let f = &cfg.objective;
    let rec = Recorder::new(f, cfg.manifold);
    let mut trace = Trace::new(cfg.meta());
    let mut x = cfg.x0.clone();
    let mut g = f.riemannian_gradient(&x)?;
    trace.push(rec.record(0, &x, &g, 0.0, 0.0, None)?);
    for k in 1..=cfg.max_iters {
        if should_stop(cfg, &g) {
            break;
        }
        let alpha = step_size(cfg, k, &x, &g)?;
        x = step_along(&x, &g, alpha, cfg.step_rule)?;
        g = f.riemannian_gradient(&x)?;
        if !trace.push(rec.record(k, &x, &g, alpha, 0.0, None)?) {
            break;
        }
    }
    Ok(trace)
}

/// Momentum descent on Euclidean space.
pub fn run_momentum(cfg: &RunConfig) -> Result<Trace> {
    cfg.validate()?;
    require_euclidean(&cfg.x0, "momentum descent")?;
    if cfg.noise.is_some() || cfg.noise_override.is_some() {
        return Err(Error::InvalidConfig("momentum descent is deterministic; remove the noise spec".into()));
    }
    let f = &cfg.objective;
    let rec = Recorder::new(f, cfg.manifold);
    let mut trace = Trace::new(cfg.meta());
    let mut x = cfg.x0.clone();
    let mut x_prev = x.clone();
    let mut x_prev2 = x.clone();
    let mut g = f.riemannian_gradient(&x)?;
    trace.push(rec.record(0, &x, &g, 0.0, 0.0, None)?);
    for k in 1..=cfg.max_iters {
        if should_stop(cfg, &g) {
            break;
        }
        let alpha = step_size(cfg, k, &x, &g)?;
        let beta = cfg
            .schedule
            .beta
            .at(k)
            .unwrap_or_else(|| momentum_ratio_beta(x.coords(), x_prev.coords(), x_prev2.coords()));
        let next = momentum_update(&x, &x_prev, g.coords(), alpha, beta);
        x_prev2 = std::mem::replace(&mut x_prev, std::mem::replace(&mut x, next));
        g = f.riemannian_gradient(&x)?;
        if !trace.push(rec.record(k, &x, &g, alpha, beta, None)?) {
            break;
        }
    }
    Ok(trace)
}

/// Stochastic descent with noise drawn from `cfg.noise` (seeded by
/// `cfg.seed`) or replayed from `cfg.noise_override`.
///
/// The step must be a power law `c / k^γ` with `γ ∈ (0.5, 1]`.
pub fn run_sgd(cfg: &RunConfig) -> Result<Trace> {
    cfg.validate()?;
    require_euclidean(&cfg.x0, "stochastic descent")?;
    check_sgd_schedule(&cfg.schedule)?;
    let dim = cfg.x0.dim();
    let noise = match (&cfg.noise, &cfg.noise_override) {
        (_, Some(_)) => None,
        (Some(spec), None) => Some(*spec),
        (None, None) => {
            return Err(Error::InvalidConfig("stochastic descent needs a noise spec or a noise override".into()));
        }
    };
    let f = &cfg.objective;
    let rec = Recorder::new(f, cfg.manifold);
    let mut state = RngState::new(cfg.seed);
    let mut trace = Trace::new(cfg.meta());
    let mut x = cfg.x0.clone();
    let mut g = f.riemannian_gradient(&x)?;
    trace.push(rec.record(0, &x, &g, 0.0, 0.0, None)?);
    for k in 1..=cfg.max_iters {
        if should_stop(cfg, &g) {
            break;
        }
        let alpha = cfg.schedule.alpha.at(k).expect("power-law schedule checked above");
        let xi = match (&noise, &cfg.noise_override) {
            (Some(spec), _) => spec.sample(&mut state),
            (None, Some(values)) => DVector::from_column_slice(&values[(k - 1) * dim..k * dim]),
            (None, None) => unreachable!(),
        };
        x = sgd_step(f, &x, alpha, &xi)?;
        g = f.riemannian_gradient(&x)?;
        if !trace.push(rec.record(k, &x, &g, alpha, 0.0, Some(xi))?) {
            break;
        }
    }
    Ok(trace)
}

/// Stochastic descent converges in expectation only for `α_k = c / k^γ` with
/// `0.5 < γ ≤ 1` and no momentum.
pub fn check_sgd_schedule(schedule: &ScheduleSpec) -> Result<()> {
    match schedule.alpha {
        StepSize::PowerLaw { gamma, .. } if gamma > 0.5 && gamma <= 1.0 => {}
        StepSize::PowerLaw { gamma, .. } => {
            return Err(Error::InvalidConfig(format!(
                "stochastic descent needs step exponent gamma in (0.5, 1], got {gamma}"
            )));
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "stochastic descent needs a power-law step c/k^gamma with gamma in (0.5, 1], got {other:?}"
            )));
        }
    }
    if schedule.beta != Momentum::Zero {
        return Err(Error::InvalidConfig("stochastic descent takes no momentum; set beta to zero".into()));
    }
    Ok(())
}
