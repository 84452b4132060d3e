use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size rule `α_k`, indexed from `k = 1` for the first step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StepSize {
    Fixed(f64),
    /// `α_k = c / k^γ`.
    PowerLaw { c: f64, gamma: f64 },
    /// `argmin_α f(x − α∇f(x))`; quadratic objectives only.
    ExactLineSearch,
}

/// Momentum rule `β_k`, indexed like [`StepSize`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Momentum {
    Zero,
    /// `β_k = d / k^γ`.
    PowerLaw { d: f64, gamma: f64 },
    /// `β_k = |x_k − x_{k−1}| / |x_{k−1} − x_{k−2}|`.
    StepRatio,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub alpha: StepSize,
    pub beta: Momentum,
}

impl ScheduleSpec {
    pub fn new(alpha: StepSize, beta: Momentum) -> Result<Self> {
        match alpha {
            StepSize::Fixed(a) if !(a > 0.0 && a.is_finite()) => {
                return Err(Error::InvalidSchedule(format!("fixed step must be positive, got {a}")));
            }
            StepSize::PowerLaw { c, gamma } => check_power_law("alpha", c, gamma)?,
            _ => {}
        }
        if let Momentum::PowerLaw { d, gamma } = beta {
            check_power_law("beta", d, gamma)?;
        }
        Ok(ScheduleSpec { alpha, beta })
    }

    /// Constant step, no momentum.
    pub fn fixed(alpha: f64) -> Result<Self> {
        ScheduleSpec::new(StepSize::Fixed(alpha), Momentum::Zero)
    }

    pub fn power_law(c: f64, gamma: f64) -> Result<Self> {
        ScheduleSpec::new(StepSize::PowerLaw { c, gamma }, Momentum::Zero)
    }
}

fn check_power_law(name: &str, scale: f64, gamma: f64) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidSchedule(format!("{name} power-law scale must be positive, got {scale}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidSchedule(format!("{name} power-law exponent must be positive, got {gamma}")));
    }
    Ok(())
}

impl StepSize {
    /// `α_k` for schedule-driven rules; `None` for line search.
    pub fn at(&self, k: usize) -> Option<f64> {
        match *self {
            StepSize::Fixed(a) => Some(a),
            StepSize::PowerLaw { c, gamma } => Some(c / (k as f64).powf(gamma)),
            StepSize::ExactLineSearch => None,
        }
    }
}

impl Momentum {
    /// `β_k` for schedule-driven rules; `None` for the step ratio.
    pub fn at(&self, k: usize) -> Option<f64> {
        match *self {
            Momentum::Zero => Some(0.0),
            Momentum::PowerLaw { d, gamma } => Some(d / (k as f64).powf(gamma)),
            Momentum::StepRatio => None,
        }
    }
}

/// Symbolic verdicts on the classical step conditions `α_k → 0`,
/// `Σ α_k = ∞` and `β_k → 0`. `None` means data-dependent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub alpha_to_zero: Option<bool>,
    pub alpha_sum_diverges: Option<bool>,
    pub beta_to_zero: Option<bool>,
}

impl ScheduleReport {
    /// All three conditions hold.
    pub fn guarantees_convergence(&self) -> bool {
        self.alpha_to_zero == Some(true) && self.alpha_sum_diverges == Some(true) && self.beta_to_zero == Some(true)
    }
}

pub fn validate_schedule(s: &ScheduleSpec) -> ScheduleReport {
    let (alpha_to_zero, alpha_sum_diverges) = match s.alpha {
        StepSize::Fixed(_) => (Some(false), Some(true)),
        StepSize::PowerLaw { gamma, .. } => (Some(true), Some(gamma <= 1.0)),
        StepSize::ExactLineSearch => (None, None),
    };
    let beta_to_zero = match s.beta {
        Momentum::Zero | Momentum::PowerLaw { .. } => Some(true),
        Momentum::StepRatio => None,
    };
    ScheduleReport { alpha_to_zero, alpha_sum_diverges, beta_to_zero }
}

/// Exact minimizer of `α ↦ f(x − α g)` for `f = ½⟨Ax, x⟩ − ⟨b, x⟩`, where
/// `g = Ax − b`: `α = ⟨g, g⟩ / ⟨Ag, g⟩`.
pub fn exact_line_search_quadratic(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> Result<f64> {
    if a.nrows() != x.len() || b.len() != x.len() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: x.len() });
    }
    let g = a * x - b;
    let gg = g.norm_squared();
    if gg == 0.0 {
        return Err(Error::ZeroGradient);
    }
    Ok(gg / (a * &g).dot(&g))
}

/// `|x_k − x_prev| / |x_prev − x_prev2|`, or 0 when the denominator is at
/// most `1e-15`.
pub fn momentum_ratio_beta(x_k: &DVector<f64>, x_prev: &DVector<f64>, x_prev2: &DVector<f64>) -> f64 {
    let den = (x_prev - x_prev2).norm();
    if den <= 1e-15 {
        return 0.0;
    }
    (x_k - x_prev).norm() / den
}
