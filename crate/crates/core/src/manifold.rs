//! Euclidean space and the unit sphere as Riemannian manifolds.
//!
//! Both manifolds are represented in ambient coordinates and carry the
//! metric induced by the ambient dot product. A [`Point`] remembers which
//! manifold it lives on; a [`Tangent`] remembers its base point, so every
//! operation can reject mixed-up arguments instead of silently computing
//! garbage.
//!
//! On the sphere S^{n-1} ⊂ ℝⁿ:
//!
//! * tangent projection: `v − ⟨v, p⟩ p`
//! * exponential map: `cos(|t|) p + sin(|t|) t / |t|` (great-circle motion)
//! * retraction: `(p + t) / |p + t|`
//! * distance: `arccos(⟨p, q⟩)`, with the dot product clamped to `[-1, 1]`

use std::fmt;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest allowed deviation of a sphere point from unit norm.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Largest allowed `|⟨v, p⟩| / max(1, |v|)` for a sphere tangent vector.
pub const TANGENCY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Manifold {
    Euclidean { dim: usize },
    Sphere { ambient_dim: usize },
}

impl Manifold {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidManifold("euclidean dimension must be >= 1".into()));
        }
        Ok(Manifold::Euclidean { dim })
    }

    /// The unit sphere S^{n-1} embedded in ℝⁿ, with `n = ambient_dim`.
    pub fn sphere(ambient_dim: usize) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(Error::InvalidManifold("sphere ambient dimension must be >= 2".into()));
        }
        Ok(Manifold::Sphere { ambient_dim })
    }

    pub fn ambient_dim(&self) -> usize {
        match *self {
            Manifold::Euclidean { dim } => dim,
            Manifold::Sphere { ambient_dim } => ambient_dim,
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self, Manifold::Sphere { .. })
    }

    /// Wraps `coords` as a point, checking the manifold constraint.
    pub fn point(&self, coords: DVector<f64>) -> Result<Point> {
        self.check_dim(coords.len())?;
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NotOnManifold {
                manifold: self.to_string(),
                detail: "non-finite coordinate".into(),
            });
        }
        if self.is_sphere() {
            let norm = coords.norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NotOnManifold {
                    manifold: self.to_string(),
                    detail: format!("|x| = {norm:.17}"),
                });
            }
        }
        Ok(Point { manifold: *self, coords })
    }

    /// Like [`Manifold::point`], but rescales onto the sphere first.
    pub fn project_point(&self, coords: DVector<f64>) -> Result<Point> {
        self.check_dim(coords.len())?;
        if self.is_sphere() {
            let norm = coords.norm();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::NotOnManifold {
                    manifold: self.to_string(),
                    detail: format!("cannot normalize a vector of norm {norm}"),
                });
            }
            return self.point(coords / norm);
        }
        self.point(coords)
    }

    pub fn point_from_slice(&self, coords: &[f64]) -> Result<Point> {
        self.point(DVector::from_column_slice(coords))
    }

    /// Samples a point: uniform on the sphere, or uniform in `[-scale, scale]ⁿ`
    /// for Euclidean space.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Point {
        let n = self.ambient_dim();
        match self {
            Manifold::Euclidean { .. } => {
                let coords = DVector::from_fn(n, |_, _| scale * (2.0 * rng.random::<f64>() - 1.0));
                Point { manifold: *self, coords }
            }
            Manifold::Sphere { .. } => loop {
                let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let norm = v.norm();
                if norm > 1e-6 {
                    break Point { manifold: *self, coords: v / norm };
                }
            },
        }
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        let expected = self.ambient_dim();
        if found != expected {
            return Err(Error::DimensionMismatch { expected, found });
        }
        Ok(())
    }
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Manifold::Euclidean { dim } => write!(f, "euclidean space R^{dim}"),
            Manifold::Sphere { ambient_dim } => write!(f, "sphere S^{} in R^{ambient_dim}", ambient_dim - 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    manifold: Manifold,
    coords: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tangent {
    base: Point,
    coords: DVector<f64>,
}

/// Wraps coordinates without checks. Lets Euclidean iterations carry a
/// non-finite iterate to the trace, which then stops the run.
pub(crate) fn raw_point(manifold: Manifold, coords: DVector<f64>) -> Point {
    debug_assert_eq!(manifold.ambient_dim(), coords.len());
    Point { manifold, coords }
}

impl Point {
    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_coords(self) -> DVector<f64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Orthogonal projection of an ambient vector onto the tangent space here.
    pub fn project(&self, v: &DVector<f64>) -> Result<Tangent> {
        self.manifold.check_dim(v.len())?;
        let coords = match self.manifold {
            Manifold::Euclidean { .. } => v.clone(),
            Manifold::Sphere { .. } => v - &self.coords * self.coords.dot(v),
        };
        Ok(Tangent { base: self.clone(), coords })
    }

    /// Wraps an ambient vector that is already tangent at this point.
    pub fn tangent(&self, coords: DVector<f64>) -> Result<Tangent> {
        self.manifold.check_dim(coords.len())?;
        if self.manifold.is_sphere() {
            let residual = coords.dot(&self.coords).abs();
            if residual > TANGENCY_TOL * coords.norm().max(1.0) {
                return Err(Error::NotTangent { residual });
            }
        }
        Ok(Tangent { base: self.clone(), coords })
    }

    pub fn zero_tangent(&self) -> Tangent {
        Tangent { base: self.clone(), coords: DVector::zeros(self.dim()) }
    }

    /// Follows the geodesic leaving this point with velocity `t` for unit time.
    pub fn exp_map(&self, t: &Tangent) -> Result<Point> {
        self.check_base(t)?;
        match self.manifold {
            Manifold::Euclidean { .. } => Ok(self.translated(&t.coords)),
            Manifold::Sphere { .. } => {
                let len = t.coords.norm();
                if len == 0.0 {
                    return Ok(self.clone());
                }
                let moved = &self.coords * len.cos() + &t.coords * (len.sin() / len);
                Ok(self.renormalized(moved))
            }
        }
    }

    /// Add-and-normalize retraction; plain translation on Euclidean space.
    pub fn retract_normalize(&self, t: &Tangent) -> Result<Point> {
        self.check_base(t)?;
        match self.manifold {
            Manifold::Euclidean { .. } => Ok(self.translated(&t.coords)),
            Manifold::Sphere { .. } => {
                if t.coords.iter().all(|c| *c == 0.0) {
                    return Ok(self.clone());
                }
                let moved = &self.coords + &t.coords;
                let norm = moved.norm();
                if norm <= 1e-12 {
                    return Err(Error::DegenerateRetraction { norm });
                }
                Ok(self.renormalized(moved))
            }
        }
    }

    pub fn distance(&self, other: &Point) -> Result<f64> {
        self.check_same_manifold(other)?;
        Ok(match self.manifold {
            Manifold::Euclidean { .. } => (&self.coords - &other.coords).norm(),
            Manifold::Sphere { .. } => self.coords.dot(&other.coords).clamp(-1.0, 1.0).acos(),
        })
    }

    /// Riemannian metric at this point (the induced ambient dot product).
    pub fn inner(&self, u: &Tangent, v: &Tangent) -> Result<f64> {
        self.check_base(u)?;
        self.check_base(v)?;
        Ok(u.coords.dot(&v.coords))
    }

    /// A random tangent vector at this point with the given length.
    pub fn random_tangent<R: Rng + ?Sized>(&self, rng: &mut R, length: f64) -> Tangent {
        loop {
            let v = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let t = self.project(&v).expect("dimension matches by construction");
            let norm = t.coords.norm();
            if norm > 1e-6 {
                return Tangent { base: t.base, coords: t.coords * (length / norm) };
            }
        }
    }

    fn translated(&self, by: &DVector<f64>) -> Point {
        Point { manifold: self.manifold, coords: &self.coords + by }
    }

    fn renormalized(&self, coords: DVector<f64>) -> Point {
        let norm = coords.norm();
        Point { manifold: self.manifold, coords: coords / norm }
    }

    fn check_base(&self, t: &Tangent) -> Result<()> {
        if t.base != *self {
            return Err(Error::BaseMismatch);
        }
        Ok(())
    }

    fn check_same_manifold(&self, other: &Point) -> Result<()> {
        if self.manifold != other.manifold {
            return Err(Error::ManifoldMismatch {
                left: self.manifold.to_string(),
                right: other.manifold.to_string(),
            });
        }
        Ok(())
    }
}

impl Tangent {
    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| *c == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Tangent {
        Tangent { base: self.base.clone(), coords: &self.coords * factor }
    }
}
