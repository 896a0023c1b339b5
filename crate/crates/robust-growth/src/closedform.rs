//! Closed-form eigenpairs: correlated geometric Brownian motion on the
//! orthant, its relative-capitalization image on the simplex, and the
//! finite-difference residual harness that verifies any claimed eigenpair.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{sqrt_spd, CovarianceField, DomainKind, DomainSpec, Eigenpair, ModelError};

#[derive(Debug, Error)]
pub enum ClosedFormError {
    #[error("closedform: {0}")]
    BadInput(String),
    #[error("closedform: grid point {point:?} is within 2h = {two_h:.3e} of the boundary (distance {dist:.3e})")]
    Geometry {
        point: Vec<f64>,
        dist: f64,
        two_h: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

// ---------------------------------------------------------------------------
// Correlated geometric Brownian motion on the orthant
// ---------------------------------------------------------------------------

/// `c_ij(x) = x_i x_j A_ij` on `(0, inf)^d` with `A` symmetric positive
/// definite. The eigenpair is `eta(x) = prod x_i^{b_i}` with
/// `b = (1/2) A^{-1} diag(A)` and `lambda = (1/8) diag(A)' A^{-1} diag(A)`.
pub struct GbmSpec {
    a: DMatrix<f64>,
    sqrt_a: DMatrix<f64>,
    a_hat: DVector<f64>,
    b_hat: DVector<f64>,
    lambda: f64,
}

impl GbmSpec {
    pub fn new(a: DMatrix<f64>) -> Result<Self, ClosedFormError> {
        let d = a.nrows();
        if d == 0 || a.ncols() != d {
            return Err(ClosedFormError::BadInput("A must be square".into()));
        }
        let sqrt_a = sqrt_spd(&a)?;
        let a_hat = DVector::from_fn(d, |i, _| a[(i, i)]);
        let a_inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| ClosedFormError::BadInput("A is singular".into()))?;
        let b_hat = 0.5 * (&a_inv * &a_hat);
        let lambda = 0.125 * a_hat.dot(&(&a_inv * &a_hat));
        // definition consistency: 2 A b = diag(A)
        let back = 2.0 * (&a * &b_hat);
        let err = (&back - &a_hat).amax();
        if err > 1e-12 * a_hat.amax().max(1.0) {
            return Err(ClosedFormError::BadInput(format!(
                "2 A b_hat = diag(A) violated by {err:.3e} (ill-conditioned A)"
            )));
        }
        Ok(Self {
            a,
            sqrt_a,
            a_hat,
            b_hat,
            lambda,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn b_hat(&self) -> &DVector<f64> {
        &self.b_hat
    }

    pub fn a_hat(&self) -> &DVector<f64> {
        &self.a_hat
    }

    pub fn domain(&self) -> DomainSpec {
        DomainSpec::orthant(self.dim()).expect("d >= 1")
    }

    pub fn covariance(&self) -> Arc<dyn CovarianceField> {
        Arc::new(GbmCovariance {
            a: self.a.clone(),
            sqrt_a: self.sqrt_a.clone(),
        })
    }

    /// Eigenpair normalized at `x0` in the open orthant.
    pub fn eigenpair(&self, x0: &[f64]) -> Result<Eigenpair, ClosedFormError> {
        if x0.len() != self.dim() || x0.iter().any(|&v| !(v > 0.0)) {
            return Err(ClosedFormError::BadInput(format!(
                "x0 = {x0:?} is not in the open orthant of dimension {}",
                self.dim()
            )));
        }
        let b = self.b_hat.clone();
        let b2 = self.b_hat.clone();
        let eta = move |x: &[f64]| -> f64 {
            let mut s = 0.0;
            for (i, &xi) in x.iter().enumerate() {
                s += b[i] * xi.ln();
            }
            s.exp()
        };
        let grad = move |x: &[f64], g: &mut [f64]| {
            for (i, &xi) in x.iter().enumerate() {
                g[i] = b2[i] / xi;
            }
        };
        Ok(Eigenpair::new(
            self.lambda,
            x0.to_vec(),
            Arc::new(eta),
            Arc::new(grad),
        )?)
    }
}

struct GbmCovariance {
    a: DMatrix<f64>,
    sqrt_a: DMatrix<f64>,
}

impl CovarianceField for GbmCovariance {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn eval_into(&self, x: &[f64], c: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                c[i * d + j] = x[i] * x[j] * self.a[(i, j)];
            }
        }
    }

    fn factor_into(&self, x: &[f64], sigma: &mut [f64]) -> Result<(), ModelError> {
        // diag(x) * sqrt(A) satisfies F F' = diag(x) A diag(x)
        let d = self.dim();
        for i in 0..d {
            for j in 0..d {
                sigma[i * d + j] = x[i] * self.sqrt_a[(i, j)];
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Relative capitalizations on the simplex
// ---------------------------------------------------------------------------

/// Image of the orthant model under `y_i = x_i / sum x_j`: the state lives on
/// the open simplex in `R^{d-1}` with `script_a_ij = A_ij - A_id - A_jd +
/// A_dd` and covariance
/// `c_ij(x) = x_i x_j (script_a_ij - (script_a x)_i - (script_a x)_j + x'
/// script_a x)`.
pub struct SimplexSpec {
    amat: DMatrix<f64>,
    sqrt_amat: DMatrix<f64>,
    a_hat: DVector<f64>,
    b_hat: DVector<f64>,
    lambda: f64,
}

impl SimplexSpec {
    pub fn new(a: DMatrix<f64>) -> Result<Self, ClosedFormError> {
        let d = a.nrows();
        if d < 2 || a.ncols() != d {
            return Err(ClosedFormError::BadInput(
                "A must be square with d >= 2".into(),
            ));
        }
        let m = d - 1;
        // build the upper triangle and mirror so symmetry is bit-exact
        let mut amat = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = a[(i, j)] - a[(i, d - 1)] - a[(j, d - 1)] + a[(d - 1, d - 1)];
                amat[(i, j)] = v;
                amat[(j, i)] = v;
            }
        }
        let sqrt_amat = sqrt_spd(&amat)?;
        let a_hat = DVector::from_fn(m, |i, _| amat[(i, i)]);
        let inv = amat
            .clone()
            .try_inverse()
            .ok_or_else(|| ClosedFormError::BadInput("script A is singular".into()))?;
        let b_hat = 0.5 * (&inv * &a_hat);
        let lambda = 0.125 * a_hat.dot(&(&inv * &a_hat));
        Ok(Self {
            amat,
            sqrt_amat,
            a_hat,
            b_hat,
            lambda,
        })
    }

    /// Dimension of the state space (one less than the number of assets).
    pub fn dim(&self) -> usize {
        self.amat.nrows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn b_hat(&self) -> &DVector<f64> {
        &self.b_hat
    }

    pub fn a_hat(&self) -> &DVector<f64> {
        &self.a_hat
    }

    pub fn amat(&self) -> &DMatrix<f64> {
        &self.amat
    }

    pub fn domain(&self) -> DomainSpec {
        DomainSpec::simplex(self.dim() + 1).expect("d >= 2")
    }

    pub fn covariance(&self) -> Arc<dyn CovarianceField> {
        Arc::new(SimplexCovariance {
            amat: self.amat.clone(),
            sqrt_amat: self.sqrt_amat.clone(),
        })
    }

    /// Eigenpair `eta(x) = (prod x_i^{b_i}) (1 - sum x_i)^{1 - sum b_i}`
    /// normalized at `x0` in the open simplex.
    pub fn eigenpair(&self, x0: &[f64]) -> Result<Eigenpair, ClosedFormError> {
        let m = self.dim();
        let in_simplex =
            |x: &[f64]| x.len() == m && x.iter().all(|&v| v > 0.0) && x.iter().sum::<f64>() < 1.0;
        if !in_simplex(x0) {
            return Err(ClosedFormError::BadInput(format!(
                "x0 = {x0:?} is not in the open simplex of dimension {m}"
            )));
        }
        let b = self.b_hat.clone();
        let b2 = self.b_hat.clone();
        let rest_pow = 1.0 - self.b_hat.sum();
        let eta = move |x: &[f64]| -> f64 {
            let mut s = 0.0;
            for (i, &xi) in x.iter().enumerate() {
                s += b[i] * xi.ln();
            }
            let slack: f64 = 1.0 - x.iter().sum::<f64>();
            s += rest_pow * slack.ln();
            s.exp()
        };
        let grad = move |x: &[f64], g: &mut [f64]| {
            let slack: f64 = 1.0 - x.iter().sum::<f64>();
            for (i, &xi) in x.iter().enumerate() {
                g[i] = b2[i] / xi - rest_pow / slack;
            }
        };
        Ok(Eigenpair::new(
            self.lambda,
            x0.to_vec(),
            Arc::new(eta),
            Arc::new(grad),
        )?)
    }
}

struct SimplexCovariance {
    amat: DMatrix<f64>,
    sqrt_amat: DMatrix<f64>,
}

impl CovarianceField for SimplexCovariance {
    fn dim(&self) -> usize {
        self.amat.nrows()
    }

    fn eval_into(&self, x: &[f64], c: &mut [f64]) {
        let m = self.dim();
        let xv = DVector::from_column_slice(x);
        let ax = &self.amat * &xv;
        let xax = xv.dot(&ax);
        for i in 0..m {
            for j in i..m {
                let v = x[i] * x[j] * (self.amat[(i, j)] - ax[i] - ax[j] + xax);
                c[i * m + j] = v;
                c[j * m + i] = v;
            }
        }
    }

    fn factor_into(&self, x: &[f64], sigma: &mut [f64]) -> Result<(), ModelError> {
        // diag(x) (I - 1 x') sqrt(script A) factors the covariance
        let m = self.dim();
        for j in 0..m {
            let mut xs = 0.0;
            for k in 0..m {
                xs += x[k] * self.sqrt_amat[(k, j)];
            }
            for i in 0..m {
                sigma[i * m + j] = x[i] * (self.sqrt_amat[(i, j)] - xs);
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Finite-difference residual and Hopf statistic
// ---------------------------------------------------------------------------

/// Maximum over `grid` of `|1/2 sum c_ij(x) d2 eta/dx_i dx_j + lambda eta| /
/// eta`, with pure second derivatives by central differences at step `h` and
/// mixed partials by the symmetric 4-point stencil. Every grid point must be
/// at distance greater than `2h` from the boundary.
pub fn pde_residual(
    pair: &Eigenpair,
    c: &dyn CovarianceField,
    domain: &DomainSpec,
    grid: &[Vec<f64>],
    h: f64,
) -> Result<f64, ClosedFormError> {
    let d = pair.dim();
    let mut cbuf = vec![0.0; d * d];
    let mut xp = vec![0.0; d];
    let mut worst: f64 = 0.0;
    for x in grid {
        let dist = domain.boundary_distance(x);
        if !(dist > 2.0 * h) {
            return Err(ClosedFormError::Geometry {
                point: x.clone(),
                dist,
                two_h: 2.0 * h,
            });
        }
        c.eval_into(x, &mut cbuf);
        let e0 = pair.eta(x);
        let mut op = 0.0;
        for i in 0..d {
            // pure second derivative
            xp.copy_from_slice(x);
            xp[i] = x[i] + h;
            let ep = pair.eta(&xp);
            xp[i] = x[i] - h;
            let em = pair.eta(&xp);
            op += 0.5 * cbuf[i * d + i] * (ep - 2.0 * e0 + em) / (h * h);
            for j in (i + 1)..d {
                xp.copy_from_slice(x);
                xp[i] = x[i] + h;
                xp[j] = x[j] + h;
                let epp = pair.eta(&xp);
                xp[j] = x[j] - h;
                let epm = pair.eta(&xp);
                xp[i] = x[i] - h;
                let emm = pair.eta(&xp);
                xp[j] = x[j] + h;
                let emp = pair.eta(&xp);
                let mixed = (epp - epm - emp + emm) / (4.0 * h * h);
                // off-diagonal terms appear twice in the sum
                op += cbuf[i * d + j] * mixed;
            }
        }
        let r = (op + pair.lambda * e0).abs() / e0;
        if r > worst {
            worst = r;
        }
    }
    Ok(worst)
}

/// Estimate `inf` and `sup` of `q(x) = (1/2) grad(log eta)' c grad(log eta)`
/// over the complement region `E \ E_n` by dense sampling: geometric grids
/// toward the boundary in one dimension, a Halton sequence filtered to the
/// region in higher dimensions.
pub fn hopf_statistic(
    pair: &Eigenpair,
    c: &dyn CovarianceField,
    domain: &DomainSpec,
    n: usize,
    sample: usize,
) -> Result<(f64, f64), ClosedFormError> {
    if n >= domain.exhaustion_count {
        return Err(ClosedFormError::BadInput(format!(
            "exhaustion level {n} out of range (count {})",
            domain.exhaustion_count
        )));
    }
    let d = domain.dim();
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(sample);
    match (d, domain.kind) {
        (1, DomainKind::Interval { alpha, beta }) => {
            let width = beta - alpha;
            let h = width / f64::powi(2.0, n as i32 + 2);
            let half = sample / 2;
            for k in 0..half {
                let t = h * f64::powf(1e-8, k as f64 / (half as f64 - 1.0));
                points.push(vec![alpha + t]);
                points.push(vec![beta - t]);
            }
        }
        (1, DomainKind::Orthant { .. }) => {
            // near-zero piece sampled uniformly in u = x^{-1/2} to resolve
            // oscillatory statistics; far piece geometrically out to 10^3 n
            let n_eff = n.max(2) as f64;
            let u0 = n_eff.sqrt();
            let half = sample / 2;
            let span = 8.0 * std::f64::consts::PI;
            for k in 0..half {
                let u = u0 + span * k as f64 / (half as f64 - 1.0);
                points.push(vec![1.0 / (u * u)]);
            }
            for k in 0..half {
                let x = n_eff * f64::powf(1e3, k as f64 / (half as f64 - 1.0));
                points.push(vec![x]);
            }
        }
        _ => {
            // Halton-filtered sampling of the complement within a padded box
            let mut tries = 0usize;
            let mut idx = 1usize;
            while points.len() < sample && tries < 400 * sample {
                tries += 1;
                let u: Vec<f64> = (0..d)
                    .map(|j| halton(idx, PRIMES[j % PRIMES.len()]))
                    .collect();
                idx += 1;
                let x: Vec<f64> = match domain.kind {
                    DomainKind::Orthant { .. } => {
                        let n_eff = (n.max(2)) as f64;
                        let lo = (1.0 / (3.0 * n_eff)).ln();
                        let hi = (3.0 * n_eff).ln();
                        u.iter().map(|&t| (lo + (hi - lo) * t).exp()).collect()
                    }
                    DomainKind::Simplex { .. } => {
                        let total: f64 = u.iter().sum();
                        if total >= 1.0 {
                            continue;
                        }
                        u.clone()
                    }
                    DomainKind::Interval { alpha, beta } => {
                        vec![alpha + (beta - alpha) * u[0]]
                    }
                };
                if domain.contains(&x) && !domain.in_level(n, &x) {
                    points.push(x);
                }
            }
        }
    }

    let mut cbuf = vec![0.0; d * d];
    let mut g = vec![0.0; d];
    let mut inf = f64::INFINITY;
    let mut sup = f64::NEG_INFINITY;
    for x in &points {
        c.eval_into(x, &mut cbuf);
        pair.grad_log_eta_into(x, &mut g);
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += g[i] * cbuf[i * d + j] * g[j];
            }
        }
        q *= 0.5;
        if q.is_finite() {
            inf = inf.min(q);
            sup = sup.max(q);
        }
    }
    Ok((inf, sup))
}

const PRIMES: [usize; 6] = [2, 3, 5, 7, 11, 13];

fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}
