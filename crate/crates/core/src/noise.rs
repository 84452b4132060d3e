//! Seeded zero-mean gradient noise with bounded higher moments.
//!
//! Streams come from ChaCha8 keyed by a 64-bit seed, with the ChaCha stream
//! id selecting independent substreams. Draws are reproducible within this
//! implementation; they are not meant to match other languages bit for bit.
//!
//! Uniform draws are `a · (2u − 1)` for `u ∈ [0, 1)` (53-bit).
//! Student-t draws use Bailey's polar method: draw `u, v` uniform on
//! `[-1, 1]` until `0 < w = u² + v² ≤ 1`, then return
//! `s · u · sqrt(ν (w^{-2/ν} − 1) / w)`.

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseFamily {
    Zero,
    /// Uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
    /// Student-t with `dof` degrees of freedom, multiplied by `scale`.
    StudentT { dof: f64, scale: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    family: NoiseFamily,
    moment_order: f64,
    dim: usize,
}

impl NoiseSpec {
    /// `moment_order` is the claimed bounded-moment order `q > 2`.
    pub fn new(family: NoiseFamily, moment_order: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidNoise("dimension must be >= 1".into()));
        }
        if !(moment_order > 2.0 && moment_order.is_finite()) {
            return Err(Error::InvalidNoise(format!("moment order q must be a finite value > 2, got {moment_order}")));
        }
        match family {
            NoiseFamily::Zero => {}
            NoiseFamily::Uniform { half_width } => {
                if !(half_width > 0.0 && half_width.is_finite()) {
                    return Err(Error::InvalidNoise(format!("uniform half-width must be > 0, got {half_width}")));
                }
            }
            NoiseFamily::StudentT { dof, scale } => {
                if !(dof > 2.0 && dof.is_finite()) {
                    return Err(Error::InvalidNoise(format!("student-t dof must be > 2, got {dof}")));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidNoise(format!("student-t scale must be > 0, got {scale}")));
                }
                if dof <= moment_order {
                    return Err(Error::InvalidNoise(format!(
                        "student-t with dof {dof} has no finite moment of order {moment_order}"
                    )));
                }
            }
        }
        Ok(NoiseSpec { family, moment_order, dim })
    }

    pub fn zero(dim: usize) -> Result<Self> {
        NoiseSpec::new(NoiseFamily::Zero, 3.0, dim)
    }

    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    pub fn moment_order(&self) -> f64 {
        self.moment_order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Per-coordinate variance.
    pub fn variance(&self) -> f64 {
        match self.family {
            NoiseFamily::Zero => 0.0,
            NoiseFamily::Uniform { half_width } => half_width * half_width / 3.0,
            NoiseFamily::StudentT { dof, scale } => scale * scale * dof / (dof - 2.0),
        }
    }

    /// One vector of i.i.d. coordinates. Always advances `state`.
    pub fn sample(&self, state: &mut RngState) -> DVector<f64> {
        state.draws += 1;
        match self.family {
            NoiseFamily::Zero => DVector::zeros(self.dim),
            NoiseFamily::Uniform { half_width } => {
                DVector::from_fn(self.dim, |_, _| half_width * (2.0 * state.rng.random::<f64>() - 1.0))
            }
            NoiseFamily::StudentT { dof, scale } => {
                DVector::from_fn(self.dim, |_, _| scale * bailey_polar_t(&mut state.rng, dof))
            }
        }
    }
}

fn bailey_polar_t<R: RngCore>(rng: &mut R, dof: f64) -> f64 {
    loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let w = u * u + v * v;
        if w > 0.0 && w <= 1.0 {
            return u * (dof * (w.powf(-2.0 / dof) - 1.0) / w).sqrt();
        }
    }
}

/// Explicit generator state threaded through sampling calls.
#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    stream: u64,
    draws: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState::substream(seed, 0)
    }

    /// Independent stream `stream` under `seed`.
    pub fn substream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngState { seed, stream, draws: 0, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of `sample` calls served so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub order: f64,
    pub n: usize,
    pub value: f64,
    /// The population moment of this order is infinite, so `value` grows
    /// without bound in `n`.
    pub diverging: bool,
}

/// `(1/n) Σ |ξ_i|^order` over `n` fresh draws from `spec`.
pub fn empirical_moment(spec: &NoiseSpec, order: f64, n: usize, seed: u64) -> Result<MomentEstimate> {
    if n < 1000 {
        return Err(Error::InvalidNoise(format!("empirical_moment needs n >= 1000, got {n}")));
    }
    if !(order > 0.0 && order.is_finite()) {
        return Err(Error::InvalidNoise(format!("moment order must be positive, got {order}")));
    }
    let mut state = RngState::new(seed);
    let sum: f64 = (0..n).map(|_| spec.sample(&mut state).norm().powf(order)).sum();
    let diverging = matches!(spec.family, NoiseFamily::StudentT { dof, .. } if order >= dof);
    Ok(MomentEstimate { order, n, value: sum / n as f64, diverging })
}
