//! Objective functions with analytic gradients.
//!
//! Three closed-form objectives are built in: the height function on a
//! sphere, a strictly convex quadratic `½⟨Ax, x⟩ − ⟨b, x⟩`, and `½|x|²`.
//! Anything implementing [`ScalarField`] can be fed to the gradient checker,
//! which is the extension point for user-supplied functions.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{Manifold, Point, Tangent};

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-6;

/// A differentiable function of ambient coordinates.
pub trait ScalarField {
    fn ambient_dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObjectiveKind {
    /// `f(x) = x_n`, the last ambient coordinate.
    SphereHeight { ambient_dim: usize },
    Quadratic { a: DMatrix<f64>, b: DVector<f64> },
    HalfSquare { dim: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Objective {
    kind: ObjectiveKind,
    known_minimizer: Option<Point>,
    known_lipschitz: Option<f64>,
}

impl Objective {
    /// Height on S^{n-1}; minimized at the south pole `-e_n` with `L = 1`.
    pub fn sphere_height(ambient_dim: usize) -> Result<Self> {
        let m = Manifold::sphere(ambient_dim)?;
        let mut south = DVector::zeros(ambient_dim);
        south[ambient_dim - 1] = -1.0;
        Ok(Objective {
            kind: ObjectiveKind::SphereHeight { ambient_dim },
            known_minimizer: Some(m.point(south)?),
            known_lipschitz: Some(1.0),
        })
    }

    /// `½⟨Ax, x⟩ − ⟨b, x⟩` for symmetric positive-definite `A`.
    ///
    /// The minimizer `A⁻¹b` comes from a Cholesky solve and the Lipschitz
    /// constant is `λ_max(A)`.
    pub fn quadratic(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return Err(Error::InvalidObjective(format!("A must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: b.len() });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidObjective("non-finite entry".into()));
        }
        if !linalg::is_symmetric(&a, 1e-12) {
            return Err(Error::InvalidObjective("A is not symmetric".into()));
        }
        let chol = a
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidObjective("A is not positive definite".into()))?;
        let x_star = chol.solve(&b);
        let lipschitz = linalg::largest_eigenvalue(&a);
        let minimizer = Manifold::euclidean(n)?.point(x_star)?;
        Ok(Objective {
            kind: ObjectiveKind::Quadratic { a, b },
            known_minimizer: Some(minimizer),
            known_lipschitz: Some(lipschitz),
        })
    }

    /// `½|x|²` on ℝⁿ.
    pub fn half_square(dim: usize) -> Result<Self> {
        let m = Manifold::euclidean(dim)?;
        Ok(Objective {
            kind: ObjectiveKind::HalfSquare { dim },
            known_minimizer: Some(m.point(DVector::zeros(dim))?),
            known_lipschitz: Some(1.0),
        })
    }

    pub fn with_lipschitz(mut self, lipschitz: f64) -> Result<Self> {
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(Error::InvalidObjective(format!("Lipschitz constant must be positive, got {lipschitz}")));
        }
        self.known_lipschitz = Some(lipschitz);
        Ok(self)
    }

    pub fn kind(&self) -> &ObjectiveKind {
        &self.kind
    }

    pub fn known_minimizer(&self) -> Option<&Point> {
        self.known_minimizer.as_ref()
    }

    pub fn known_lipschitz(&self) -> Option<f64> {
        self.known_lipschitz
    }

    /// The manifold this objective is naturally posed on.
    pub fn natural_manifold(&self) -> Manifold {
        match self.kind {
            ObjectiveKind::SphereHeight { ambient_dim } => Manifold::Sphere { ambient_dim },
            ObjectiveKind::Quadratic { ref b, .. } => Manifold::Euclidean { dim: b.len() },
            ObjectiveKind::HalfSquare { dim } => Manifold::Euclidean { dim },
        }
    }

    /// `f(x*)`, when the minimizer is known.
    pub fn optimal_value(&self) -> Option<f64> {
        self.known_minimizer.as_ref().map(|p| self.value(p.coords()))
    }

    pub fn eval(&self, x: &Point) -> Result<f64> {
        self.check_dim(x.dim())?;
        Ok(self.value(x.coords()))
    }

    pub fn euclidean_gradient(&self, x: &Point) -> Result<DVector<f64>> {
        self.check_dim(x.dim())?;
        Ok(self.gradient(x.coords()))
    }

    /// Ambient gradient projected onto the tangent space at `x`.
    pub fn riemannian_gradient(&self, x: &Point) -> Result<Tangent> {
        let g = self.euclidean_gradient(x)?;
        x.project(&g)
    }

    /// Estimates the Lipschitz constant of the Riemannian gradient on `m`.
    ///
    /// Quadratics get the exact `λ_max(A)`. Every other objective gets the
    /// largest ratio `|∇f(x) − ∇f(y)| / d(x, y)` over `n_samples` random pairs,
    /// which is a lower bound on the true constant.
    pub fn lipschitz_estimate(&self, m: Manifold, n_samples: usize, seed: u64) -> Result<f64> {
        self.check_dim(m.ambient_dim())?;
        if n_samples < 2 {
            return Err(Error::InvalidObjective("lipschitz_estimate needs at least 2 samples".into()));
        }
        if let ObjectiveKind::Quadratic { ref a, .. } = self.kind {
            return Ok(linalg::largest_eigenvalue(a));
        }
        self.sampled_lipschitz(m, n_samples, seed)
    }

    /// Largest gradient-difference ratio over random pairs on `m`.
    ///
    /// Pair separations are log-uniform in `[1e-3, 3)` so both local and
    /// global variation get sampled.
    pub fn sampled_lipschitz(&self, m: Manifold, n_samples: usize, seed: u64) -> Result<f64> {
        self.check_dim(m.ambient_dim())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (1e-3_f64.ln(), 3.0_f64.ln());
        let mut best = 0.0_f64;
        for _ in 0..n_samples {
            let x = m.random_point(&mut rng, 1.0);
            let len = (lo + (hi - lo) * rand::Rng::random::<f64>(&mut rng)).exp();
            let y = x.exp_map(&x.random_tangent(&mut rng, len))?;
            let d = x.distance(&y)?;
            if d <= 0.0 {
                continue;
            }
            let gx = self.riemannian_gradient(&x)?;
            let gy = self.riemannian_gradient(&y)?;
            best = best.max((gx.coords() - gy.coords()).norm() / d);
        }
        Ok(best)
    }

    /// `|∇f(x)| · d(x, x*) / (f(x) − f*)`.
    ///
    /// A ratio below one means the gradient is smaller than the secant slope
    /// towards the minimizer. This happens near non-minimizing critical
    /// points, such as the north pole for the sphere height. `None` when the
    /// minimizer is unknown or the gap is zero.
    pub fn gradient_gap_ratio(&self, x: &Point) -> Result<Option<f64>> {
        let Some(x_star) = self.known_minimizer.as_ref() else {
            return Ok(None);
        };
        let gap = self.eval(x)? - self.value(x_star.coords());
        if gap <= 0.0 {
            return Ok(None);
        }
        let g = self.riemannian_gradient(x)?.norm();
        Ok(Some(g * x.distance(x_star)? / gap))
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        let expected = self.ambient_dim();
        if found != expected {
            return Err(Error::DimensionMismatch { expected, found });
        }
        Ok(())
    }
}

impl ScalarField for Objective {
    fn ambient_dim(&self) -> usize {
        self.natural_manifold().ambient_dim()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        match &self.kind {
            ObjectiveKind::SphereHeight { ambient_dim } => x[ambient_dim - 1],
            ObjectiveKind::Quadratic { a, b } => 0.5 * (a * x).dot(x) - b.dot(x),
            ObjectiveKind::HalfSquare { .. } => 0.5 * x.norm_squared(),
        }
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            ObjectiveKind::SphereHeight { ambient_dim } => {
                let mut g = DVector::zeros(*ambient_dim);
                g[ambient_dim - 1] = 1.0;
                g
            }
            ObjectiveKind::Quadratic { a, b } => a * x - b,
            ObjectiveKind::HalfSquare { .. } => x.clone(),
        }
    }
}

/// Central differences `(f(x + h e_i) − f(x − h e_i)) / 2h`, one per ambient
/// coordinate. The result is an ambient vector; project it if a tangent
/// comparison is wanted.
pub fn finite_difference_gradient<F: ScalarField + ?Sized>(f: &F, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut probe = x.clone();
    DVector::from_fn(x.len(), |i, _| {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f.value(&probe);
        probe[i] = orig - h;
        let down = f.value(&probe);
        probe[i] = orig;
        (up - down) / (2.0 * h)
    })
}

/// `|analytic − numeric| / max(1, |analytic|, |numeric|)`.
pub fn gradient_relative_error(analytic: &DVector<f64>, numeric: &DVector<f64>) -> f64 {
    let scale = analytic.norm().max(numeric.norm()).max(1.0);
    (analytic - numeric).norm() / scale
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use approx::assert_abs_diff_eq;

    use super::*;

    fn paper_quadratic() -> Objective {
        Objective::quadratic(
            DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]),
            DVector::from_column_slice(&[1.0, 2.0]),
        )
        .unwrap()
    }

    fn r2(x: f64, y: f64) -> Point {
        Manifold::euclidean(2).unwrap().point_from_slice(&[x, y]).unwrap()
    }

    /// Cramer's rule for 2x2 systems; independent of the Cholesky path.
    fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> [f64; 2] {
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        [(b[0] * a[1][1] - a[0][1] * b[1]) / det, (a[0][0] * b[1] - b[0] * a[1][0]) / det]
    }

    #[test]
    fn quadratic_values() {
        let f = paper_quadratic();
        assert_eq!(f.eval(&r2(0.0, 0.0)).unwrap(), 0.0);
        let xs = solve2([[4.0, 1.0], [1.0, 3.0]], [1.0, 2.0]);
        assert_abs_diff_eq!(xs[0], 1.0 / 11.0, epsilon = 1e-15);
        assert_abs_diff_eq!(xs[1], 7.0 / 11.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.eval(&r2(xs[0], xs[1])).unwrap(), -15.0 / 22.0, epsilon = 1e-15);

        let m = f.known_minimizer().unwrap();
        assert_abs_diff_eq!(m.coords()[0], xs[0], epsilon = 1e-15);
        assert_abs_diff_eq!(m.coords()[1], xs[1], epsilon = 1e-15);
    }

    #[test]
    fn quadratic_gradients() {
        let f = paper_quadratic();
        let g = f.euclidean_gradient(&r2(0.0, 0.0)).unwrap();
        assert_eq!(g.as_slice(), &[-1.0, -2.0]);
        let g = f.euclidean_gradient(f.known_minimizer().unwrap()).unwrap();
        assert!(g.norm() <= 1e-15);
        let rg = f.riemannian_gradient(&r2(0.0, 0.0)).unwrap();
        assert_eq!(rg.coords().as_slice(), &[-1.0, -2.0]);
    }

    #[test]
    fn rejects_bad_quadratics() {
        let b = DVector::from_column_slice(&[1.0, 2.0]);
        let asym = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 2.0, 3.0]);
        assert!(Objective::quadratic(asym, b.clone()).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(Objective::quadratic(indefinite, b.clone()).is_err());
        let a = DMatrix::identity(3, 3);
        assert!(matches!(Objective::quadratic(a, b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn sphere_height_values_and_gradients() {
        let f = Objective::sphere_height(3).unwrap();
        let s2 = Manifold::sphere(3).unwrap();
        let south = s2.point_from_slice(&[0.0, 0.0, -1.0]).unwrap();
        assert_eq!(f.eval(&south).unwrap(), -1.0);
        assert_eq!(f.euclidean_gradient(&south).unwrap().as_slice(), &[0.0, 0.0, 1.0]);
        assert!(f.riemannian_gradient(&south).unwrap().is_zero());

        let mid = s2.point_from_slice(&[FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2]).unwrap();
        let g = f.riemannian_gradient(&mid).unwrap();
        let (x1, x2, x3) = (FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2);
        let closed = [-x3 * x1, -x3 * x2, 1.0 - x3 * x3];
        for (a, b) in g.coords().iter().zip(closed) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(g.coords()[0], -0.5, epsilon = 1e-15);

        let wrong = Manifold::sphere(4).unwrap().point_from_slice(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(f.eval(&wrong).is_err());
    }

    #[test]
    fn finite_difference_examples() {
        let half = Objective::half_square(1).unwrap();
        let g = finite_difference_gradient(&half, &DVector::from_column_slice(&[3.0]), 1e-6);
        assert_abs_diff_eq!(g[0], 3.0, epsilon = 1e-6);

        let q = paper_quadratic();
        let g = finite_difference_gradient(&q, &DVector::from_column_slice(&[1.0, 1.0]), 1e-6);
        assert_abs_diff_eq!(g[0], 4.0, epsilon = 1e-5);
        assert_abs_diff_eq!(g[1], 2.0, epsilon = 1e-5);

        let h = Objective::sphere_height(3).unwrap();
        let g = finite_difference_gradient(&h, &DVector::from_column_slice(&[0.3, -0.2, 0.9]), 1e-6);
        for (a, b) in g.iter().zip([0.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn lipschitz_examples() {
        let half = Objective::half_square(3).unwrap();
        let l = half.lipschitz_estimate(Manifold::euclidean(3).unwrap(), 100, 1).unwrap();
        assert_abs_diff_eq!(l, 1.0, epsilon = 1e-12);

        let q = paper_quadratic();
        let l = q.lipschitz_estimate(Manifold::euclidean(2).unwrap(), 2, 1).unwrap();
        // characteristic polynomial λ² − 7λ + 11
        let top = (7.0 + 5.0_f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(l * l - 7.0 * l + 11.0, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(l, top, epsilon = 1e-9);

        let h = Objective::sphere_height(3).unwrap();
        let l = h.lipschitz_estimate(Manifold::sphere(3).unwrap(), 10_000, 1).unwrap();
        assert!((0.9..=1.0 + 1e-6).contains(&l), "sampled L = {l}");
        assert!(h.lipschitz_estimate(Manifold::sphere(3).unwrap(), 1, 1).is_err());
    }

    #[test]
    fn gap_ratio_fails_at_the_north_pole() {
        let f = Objective::sphere_height(3).unwrap();
        let north = Manifold::sphere(3).unwrap().point_from_slice(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(f.gradient_gap_ratio(&north).unwrap(), Some(0.0));
        let south = f.known_minimizer().unwrap().clone();
        assert_eq!(f.gradient_gap_ratio(&south).unwrap(), None);
    }

    #[test]
    fn relative_error_uses_unit_floor() {
        let a = DVector::from_column_slice(&[1e-9]);
        let b = DVector::from_column_slice(&[2e-9]);
        assert!(gradient_relative_error(&a, &b) < 1e-8);
        let a = DVector::from_column_slice(&[100.0]);
        let b = DVector::from_column_slice(&[101.0]);
        assert_abs_diff_eq!(gradient_relative_error(&a, &b), 1.0 / 101.0, epsilon = 1e-15);
    }
}
