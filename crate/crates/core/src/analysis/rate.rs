//! Power-law rate fitting and envelope checks.
//!
//! A claim of the form `e_k = O(k^{-p})` is made testable in two ways:
//! [`fit_rate`] estimates `p` by least squares in log-log coordinates, and
//! [`check_bound`] asserts `e_k ≤ C / k^p` past an anchor iterate, with `C`
//! either given or calibrated from the anchor itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values below this are rounding noise, not signal, and are left out of fits.
pub const LOG_FLOOR: f64 = 1e-15;

/// Fits use at most this many log-spaced points.
pub const MAX_FIT_POINTS: usize = 200;

/// Default anchor iterate for calibrated envelopes.
pub const DEFAULT_ANCHOR: usize = 10;

/// `e_k ≈ constant · k^{-exponent}` over `window`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub constant: f64,
    pub r_squared: f64,
    pub window: (usize, usize),
    pub points: usize,
}

/// Least-squares fit of `ln e_k = ln C − p ln k` over `k_lo ≤ k ≤ k_hi`.
///
/// Long windows are thinned to [`MAX_FIT_POINTS`] log-spaced iterates so
/// large `k` does not dominate the regression.
pub fn fit_rate(series: &[(usize, f64)], window: (usize, usize)) -> Result<RateFit> {
    let (k_lo, k_hi) = window;
    if k_lo < 1 || k_hi <= k_lo {
        return Err(Error::EmptyWindow(format!("window {k_lo}:{k_hi} needs 1 <= k_lo < k_hi")));
    }
    let mut pts: Vec<(usize, f64)> = Vec::new();
    for &(k, e) in series.iter().filter(|(k, _)| (k_lo..=k_hi).contains(k)) {
        if !(e > 0.0) {
            return Err(Error::NonPositive { k, value: e });
        }
        if e >= LOG_FLOOR {
            pts.push((k, e));
        }
    }
    pts.sort_by_key(|p| p.0);
    let pts = log_spaced(&pts, k_lo, k_hi);
    if pts.len() < 3 {
        return Err(Error::EmptyWindow(format!(
            "window {k_lo}:{k_hi} holds {} usable points, need at least 3",
            pts.len()
        )));
    }

    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|(k, _)| (*k as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, e)| e.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - x_mean, y - y_mean);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit { exponent: -slope, constant: intercept.exp(), r_squared, window, points: pts.len() })
}

fn log_spaced(pts: &[(usize, f64)], k_lo: usize, k_hi: usize) -> Vec<(usize, f64)> {
    if pts.len() <= MAX_FIT_POINTS {
        return pts.to_vec();
    }
    let (lo, hi) = ((k_lo as f64).ln(), (k_hi as f64).ln());
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(MAX_FIT_POINTS);
    for j in 0..MAX_FIT_POINTS {
        let target = (lo + (hi - lo) * j as f64 / (MAX_FIT_POINTS - 1) as f64).exp();
        let idx = pts.partition_point(|(k, _)| (*k as f64) < target);
        if let Some(&p) = pts.get(idx) {
            if out.last().is_none_or(|last| last.0 != p.0) {
                out.push(p);
            }
        }
    }
    out
}

/// Where the envelope constant comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BoundConstant {
    /// A known constant, e.g. `L · d(x0, x*)² / 2`.
    Explicit(f64),
    /// `C = e_anchor · anchor^p`, for O(·) claims with an unstated constant.
    Anchored,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub satisfied: bool,
    pub worst_k: usize,
    /// `max_k e_k · k^p / C` over the checked iterates.
    pub worst_ratio: f64,
    pub anchor_k: usize,
    pub constant: f64,
    pub exponent: f64,
    pub tolerance: f64,
    pub mode: BoundConstant,
    pub checked: usize,
}

/// Checks `e_k · k^p ≤ C · (1 + tolerance)` for every `k > anchor_k` in the series.
pub fn check_bound(
    series: &[(usize, f64)],
    exponent: f64,
    mode: BoundConstant,
    anchor_k: usize,
    tolerance: f64,
) -> Result<BoundReport> {
    let constant = match mode {
        BoundConstant::Explicit(c) => {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidConfig(format!("bound constant must be positive, got {c}")));
            }
            c
        }
        BoundConstant::Anchored => {
            if anchor_k == 0 {
                return Err(Error::InvalidConfig("anchored bounds need anchor_k >= 1".into()));
            }
            let &(_, e) = series
                .iter()
                .find(|(k, _)| *k == anchor_k)
                .ok_or_else(|| Error::EmptyWindow(format!("series has no value at anchor k = {anchor_k}")))?;
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::NonPositive { k: anchor_k, value: e });
            }
            e * (anchor_k as f64).powf(exponent)
        }
    };
    let limit = constant * (1.0 + tolerance);

    let mut satisfied = true;
    let mut worst = (0usize, f64::NEG_INFINITY);
    let mut checked = 0;
    for &(k, e) in series.iter().filter(|(k, _)| *k > anchor_k) {
        checked += 1;
        let scaled = e * (k as f64).powf(exponent);
        // NaN fails the comparison, which is what we want.
        if !(scaled <= limit) {
            satisfied = false;
        }
        let ratio = if scaled.is_nan() { f64::INFINITY } else { scaled / constant };
        if ratio > worst.1 {
            worst = (k, ratio);
        }
    }
    if checked == 0 {
        return Err(Error::EmptyWindow(format!("no iterates beyond anchor k = {anchor_k}")));
    }
    Ok(BoundReport {
        satisfied,
        worst_k: worst.0,
        worst_ratio: worst.1,
        anchor_k,
        constant,
        exponent,
        tolerance,
        mode,
        checked,
    })
}

/// `L · d(x0, x*)² / 2`, the 1/k envelope constant for Riemannian descent with
/// step `1/L`.
pub fn riemannian_envelope_constant(lipschitz: f64, initial_distance: f64) -> f64 {
    lipschitz * initial_distance * initial_distance / 2.0
}
