//! State spaces, nested exhaustions, covariance and drift fields.
//!
//! Everything downstream (the 1-D eigensolver, the path simulator, the
//! wealth-process transforms) consumes the types declared here. Domains and
//! fields are immutable after construction and all evaluators are pure
//! functions of the state, so values can be shared freely across threads.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model: exhaustion level {level} out of range (domain exposes {count} levels)")]
    LevelOutOfRange { level: usize, count: usize },
    #[error("model: point dimension {got} does not match domain dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("model: matrix is not symmetric (max |c_ij - c_ji| = {asym:.3e})")]
    NotSymmetric { asym: f64 },
    #[error("model: matrix is not positive definite (smallest eigenvalue {min_eig:.3e} <= tolerance {tol:.3e}); evaluations must stay in the interior")]
    NotPositiveDefinite { min_eig: f64, tol: f64 },
    #[error("model: interval requires finite alpha < beta, got ({alpha}, {beta})")]
    BadInterval { alpha: f64, beta: f64 },
    #[error("model: {0}")]
    Invalid(String),
}

/// Shape of the open connected state space `E`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    /// Bounded interval `(alpha, beta)`.
    Interval { alpha: f64, beta: f64 },
    /// Positive orthant `(0, inf)^d`.
    Orthant { dim: usize },
    /// Open simplex `{x_i > 0, sum x_i < 1}` in `R^{d-1}` (relative
    /// capitalizations of `d` assets).
    Simplex { assets: usize },
}

/// A state space together with its nested exhaustion `E_0 c E_1 c ... c E`.
///
/// The exhaustion shapes are fixed by formula so that exit detection is a
/// handful of comparisons: intervals shrink by `h_n = (beta-alpha)/2^(n+2)`
/// from each end, orthants use `1/n < x_i < n`, and the simplex uses
/// `x_i > 1/(n+d)` with `sum x_i < 1 - 1/(n+d)`.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub exhaustion_count: usize,
    /// Synthetic outer boundary for unbounded domains. Hitting it is recorded
    /// separately from true boundary absorption; at the default radius such
    /// hits are measure-negligible on desk-scale horizons.
    pub outer_radius: f64,
}

pub const DEFAULT_EXHAUSTION_COUNT: usize = 36;
pub const DEFAULT_OUTER_RADIUS: f64 = 1e6;

impl DomainSpec {
    pub fn interval(alpha: f64, beta: f64) -> Result<Self, ModelError> {
        if !(alpha.is_finite() && beta.is_finite() && alpha < beta) {
            return Err(ModelError::BadInterval { alpha, beta });
        }
        Ok(Self {
            kind: DomainKind::Interval { alpha, beta },
            exhaustion_count: DEFAULT_EXHAUSTION_COUNT,
            outer_radius: DEFAULT_OUTER_RADIUS,
        })
    }

    pub fn orthant(dim: usize) -> Result<Self, ModelError> {
        if dim < 1 {
            return Err(ModelError::Invalid("orthant requires d >= 1".into()));
        }
        Ok(Self {
            kind: DomainKind::Orthant { dim },
            exhaustion_count: DEFAULT_EXHAUSTION_COUNT,
            outer_radius: DEFAULT_OUTER_RADIUS,
        })
    }

    pub fn simplex(assets: usize) -> Result<Self, ModelError> {
        if assets < 2 {
            return Err(ModelError::Invalid("simplex requires d >= 2".into()));
        }
        Ok(Self {
            kind: DomainKind::Simplex { assets },
            exhaustion_count: DEFAULT_EXHAUSTION_COUNT,
            outer_radius: DEFAULT_OUTER_RADIUS,
        })
    }

    /// Ambient dimension of points in `E`.
    pub fn dim(&self) -> usize {
        match self.kind {
            DomainKind::Interval { .. } => 1,
            DomainKind::Orthant { dim } => dim,
            DomainKind::Simplex { assets } => assets - 1,
        }
    }

    /// Whether `x` lies in the open set `E` (the synthetic outer boundary is
    /// not part of this test; see [`DomainSpec::outer_hit`]).
    pub fn contains(&self, x: &[f64]) -> bool {
        match self.kind {
            DomainKind::Interval { alpha, beta } => x[0] > alpha && x[0] < beta,
            DomainKind::Orthant { .. } => x.iter().all(|&xi| xi > 0.0),
            DomainKind::Simplex { .. } => {
                x.iter().all(|&xi| xi > 0.0) && x.iter().sum::<f64>() < 1.0
            }
        }
    }

    /// Whether `x` escaped past the synthetic outer boundary of an unbounded
    /// domain. Always false for bounded domains.
    pub fn outer_hit(&self, x: &[f64]) -> bool {
        match self.kind {
            DomainKind::Orthant { .. } => x.iter().any(|&xi| xi >= self.outer_radius),
            _ => false,
        }
    }

    /// Membership oracle for the exhausting subdomain `E_n`.
    pub fn exhaustion_member(&self, n: usize, x: &[f64]) -> Result<bool, ModelError> {
        if n >= self.exhaustion_count {
            return Err(ModelError::LevelOutOfRange {
                level: n,
                count: self.exhaustion_count,
            });
        }
        if x.len() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                got: x.len(),
                expected: self.dim(),
            });
        }
        Ok(self.in_level(n, x))
    }

    #[inline]
    pub(crate) fn in_level(&self, n: usize, x: &[f64]) -> bool {
        match self.kind {
            DomainKind::Interval { alpha, beta } => {
                let h = (beta - alpha) / exp2_usize(n + 2);
                x[0] > alpha + h && x[0] < beta - h
            }
            DomainKind::Orthant { .. } => {
                // E_0 and E_1 are empty under the 1/n < x_i < n recipe.
                if n < 2 {
                    return false;
                }
                let lo = 1.0 / n as f64;
                let hi = n as f64;
                x.iter().all(|&xi| xi > lo && xi < hi)
            }
            DomainKind::Simplex { assets } => {
                let m = 1.0 / (n as f64 + assets as f64);
                x.iter().all(|&xi| xi > m) && x.iter().sum::<f64>() < 1.0 - m
            }
        }
    }

    /// Euclidean distance from `x` to the true boundary of `E` (ignoring the
    /// synthetic outer boundary).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self.kind {
            DomainKind::Interval { alpha, beta } => (x[0] - alpha).min(beta - x[0]),
            DomainKind::Orthant { .. } => x.iter().cloned().fold(f64::INFINITY, f64::min),
            DomainKind::Simplex { assets } => {
                let coord = x.iter().cloned().fold(f64::INFINITY, f64::min);
                let slack = (1.0 - x.iter().sum::<f64>()) / ((assets as f64 - 1.0).sqrt());
                coord.min(slack)
            }
        }
    }

    /// Smallest level `n` with `x` in `E_n`, or `None` if no exposed level
    /// contains `x`.
    pub fn min_enclosing_level(&self, x: &[f64]) -> Option<usize> {
        // Nesting makes membership monotone in n, so the first hit is the answer.
        (0..self.exhaustion_count).find(|&n| self.in_level(n, x))
    }
}

#[inline]
fn exp2_usize(n: usize) -> f64 {
    f64::powi(2.0, n as i32)
}

/// The matrix function `c(x)`: symmetric, strictly positive definite at every
/// interior point. `eval_into` writes the `d*d` row-major matrix; the
/// diffusion factor is any matrix `s` with `s s' = c(x)` (the symmetric square
/// root by default, a cheaper analytic factor where one is known).
pub trait CovarianceField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval_into(&self, x: &[f64], c: &mut [f64]);

    /// Scalar evaluation, meaningful for one-dimensional fields only.
    fn scalar(&self, x: f64) -> f64 {
        debug_assert_eq!(self.dim(), 1);
        let mut c = [0.0];
        self.eval_into(&[x], &mut c);
        c[0]
    }

    fn factor_into(&self, x: &[f64], sigma: &mut [f64]) -> Result<(), ModelError> {
        let d = self.dim();
        if d == 1 {
            let c = self.scalar(x[0]);
            if !(c > 0.0) {
                return Err(ModelError::NotPositiveDefinite {
                    min_eig: c,
                    tol: 0.0,
                });
            }
            sigma[0] = c.sqrt();
            return Ok(());
        }
        let mut c = vec![0.0; d * d];
        self.eval_into(x, &mut c);
        let m = DMatrix::from_row_slice(d, d, &c);
        let s = sqrt_spd(&m)?;
        for i in 0..d {
            for j in 0..d {
                sigma[i * d + j] = s[(i, j)];
            }
        }
        Ok(())
    }

    /// Declared or estimated endpoint exponents `(p_alpha, p_beta)` such that
    /// `c(x) ~ (x-alpha)^p_alpha` near `alpha` and `(beta-x)^p_beta` near
    /// `beta`. One-dimensional fields only.
    fn endpoint_orders(&self) -> Option<(f64, f64)> {
        None
    }
}

/// One-dimensional covariance from a plain function, with optional declared
/// endpoint orders.
pub struct Cov1d<F: Fn(f64) -> f64 + Send + Sync> {
    f: F,
    orders: Option<(f64, f64)>,
}

impl<F: Fn(f64) -> f64 + Send + Sync> Cov1d<F> {
    pub fn new(f: F) -> Self {
        Self { f, orders: None }
    }

    pub fn with_orders(f: F, p_alpha: f64, p_beta: f64) -> Self {
        Self {
            f,
            orders: Some((p_alpha, p_beta)),
        }
    }
}

impl<F: Fn(f64) -> f64 + Send + Sync> CovarianceField for Cov1d<F> {
    fn dim(&self) -> usize {
        1
    }

    fn eval_into(&self, x: &[f64], c: &mut [f64]) {
        c[0] = (self.f)(x[0]);
    }

    fn scalar(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    fn endpoint_orders(&self) -> Option<(f64, f64)> {
        self.orders
    }
}

/// A Markovian candidate drift `b(x)`, standing in for a model `P` in the
/// admissible class. Whether a given drift truly defines a member of the
/// stable subclass is not decidable numerically; runs are labelled
/// "assumed-in-Pi-star" by the front end.
pub trait DriftField: Send + Sync {
    fn dim(&self) -> usize;
    fn eval_into(&self, x: &[f64], b: &mut [f64]);
}

pub struct Drift1d<F: Fn(f64) -> f64 + Send + Sync>(pub F);

impl<F: Fn(f64) -> f64 + Send + Sync> DriftField for Drift1d<F> {
    fn dim(&self) -> usize {
        1
    }
    fn eval_into(&self, x: &[f64], b: &mut [f64]) {
        b[0] = (self.0)(x[0]);
    }
}

/// Unique symmetric strictly positive definite square root of a symmetric
/// positive definite matrix, via the spectral decomposition.
///
/// Fails if the input is visibly asymmetric or the smallest eigenvalue does
/// not clear a relative tolerance; degeneracy signals that the caller drifted
/// out of the interior of the domain.
pub fn sqrt_spd(c: &DMatrix<f64>) -> Result<DMatrix<f64>, ModelError> {
    let n = c.nrows();
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((c[(i, j)] - c[(j, i)]).abs());
        }
    }
    let scale = c.iter().cloned().fold(0.0f64, |a, v| a.max(v.abs()));
    if asym > 1e-12 * scale.max(1.0) {
        return Err(ModelError::NotSymmetric { asym });
    }
    let eig = nalgebra::SymmetricEigen::new(c.clone());
    let max_eig = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * max_eig.max(1e-300);
    if min_eig <= tol {
        return Err(ModelError::NotPositiveDefinite { min_eig, tol });
    }
    let sqrt_vals = DVector::from_iterator(n, eig.eigenvalues.iter().map(|&v| v.sqrt()));
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&sqrt_vals) * q.transpose())
}

/// Estimate endpoint orders of a 1-D covariance by log-log least squares on 32
/// geometrically spaced points in the last 1% of the interval at each end.
/// Declared orders on the field take precedence over this estimate.
pub fn estimate_endpoint_orders(
    c: &dyn CovarianceField,
    alpha: f64,
    beta: f64,
) -> (f64, f64) {
    debug_assert_eq!(c.dim(), 1);
    let width = beta - alpha;
    let slope = |left: bool| {
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        let n = 32usize;
        for k in 0..n {
            // t runs geometrically from 1e-8 to 1e-2 of the interval width
            let t = 1e-8 * f64::powf(1e6, k as f64 / (n as f64 - 1.0));
            let x = if left { alpha + width * t } else { beta - width * t };
            let v = c.scalar(x);
            if !(v > 0.0) {
                continue;
            }
            let lx = (width * t).ln();
            let ly = v.ln();
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
        }
        let n = n as f64;
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };
    (slope(true), slope(false))
}

type EtaFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradLogFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A candidate or principal eigenpair `(lambda, eta)` with the derived
/// log-gradient, normalized so that `eta(x0) = 1` exactly.
#[derive(Clone)]
pub struct Eigenpair {
    pub lambda: f64,
    pub x0: Vec<f64>,
    eta_raw: Arc<EtaFn>,
    grad_log: Arc<GradLogFn>,
    eta_at_x0: f64,
}

impl Eigenpair {
    /// Build from an un-normalized eigenfunction and its log-gradient.
    /// `eta_raw(x0)` must be finite and strictly positive.
    pub fn new(
        lambda: f64,
        x0: Vec<f64>,
        eta_raw: Arc<EtaFn>,
        grad_log: Arc<GradLogFn>,
    ) -> Result<Self, ModelError> {
        let eta_at_x0 = eta_raw(&x0);
        if !(eta_at_x0.is_finite() && eta_at_x0 > 0.0) {
            return Err(ModelError::Invalid(format!(
                "eigenfunction must be positive and finite at the anchor point (got {eta_at_x0})"
            )));
        }
        Ok(Self {
            lambda,
            x0,
            eta_raw,
            grad_log,
            eta_at_x0,
        })
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// Normalized eigenfunction value. NaN propagates for out-of-domain
    /// arguments; callers that cannot tolerate that must check membership.
    #[inline]
    pub fn eta(&self, x: &[f64]) -> f64 {
        (self.eta_raw)(x) / self.eta_at_x0
    }

    #[inline]
    pub fn log_eta(&self, x: &[f64]) -> f64 {
        self.eta(x).ln()
    }

    #[inline]
    pub fn grad_log_eta_into(&self, x: &[f64], out: &mut [f64]) {
        (self.grad_log)(x, out)
    }

    /// Scalar log-derivative, for one-dimensional pairs.
    pub fn grad_log_eta_1d(&self, x: f64) -> f64 {
        let mut g = [0.0];
        (self.grad_log)(&[x], &mut g);
        g[0]
    }

    /// Same eigenpair re-normalized at a different anchor.
    pub fn renormalized_at(&self, x0: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(
            self.lambda,
            x0,
            Arc::clone(&self.eta_raw),
            Arc::clone(&self.grad_log),
        )
    }
}
