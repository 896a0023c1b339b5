//! Named example catalog: every built-in model ships with its domain,
//! covariance field, exact eigenpair, solver defaults, and a verification
//! recipe, so the CLI can dispatch by name without formula entry.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::closedform::{pde_residual, ClosedFormError, GbmSpec, SimplexSpec};
use crate::model::{Cov1d, CovarianceField, DomainSpec, Eigenpair};
use crate::specfun::{int_cos_inv_sqrt, int_log_neg_log, LOG_INTEGRAL_ROOT};

/// A registry entry: everything needed to solve, simulate, and verify one
/// built-in model.
pub struct Example {
    pub name: &'static str,
    pub description: &'static str,
    pub domain: DomainSpec,
    pub covariance: Arc<dyn CovarianceField>,
    /// Exact reference eigenpair, normalized at `x0`.
    pub pair: Eigenpair,
    pub x0: Vec<f64>,
    /// Epsilon schedule for the 1-D solver, where applicable.
    pub epsilons: Option<Vec<f64>>,
    /// Suggested simulation defaults (dt, absorb level).
    pub default_dt: f64,
    pub default_absorb_level: usize,
    /// Verification grid recipe and residual threshold.
    pub verify: VerifyRecipe,
}

pub struct VerifyRecipe {
    pub grid: GridRecipe,
    pub h: f64,
    pub threshold: f64,
}

pub enum GridRecipe {
    Uniform1d { lo: f64, hi: f64, n: usize },
    HaltonBox { lo: f64, hi: f64, n: usize },
    HaltonSimplex { margin: f64, n: usize },
}

impl GridRecipe {
    pub fn points(&self, dim: usize) -> Vec<Vec<f64>> {
        match *self {
            GridRecipe::Uniform1d { lo, hi, n } => (0..n)
                .map(|k| vec![lo + (hi - lo) * k as f64 / (n - 1) as f64])
                .collect(),
            GridRecipe::HaltonBox { lo, hi, n } => (0..n)
                .map(|k| {
                    (0..dim)
                        .map(|j| lo + (hi - lo) * halton(k + 1, PRIMES[j]))
                        .collect()
                })
                .collect(),
            GridRecipe::HaltonSimplex { margin, n } => {
                let mut pts = Vec::with_capacity(n);
                let mut idx = 1usize;
                while pts.len() < n {
                    let x: Vec<f64> = (0..dim).map(|j| halton(idx, PRIMES[j])).collect();
                    idx += 1;
                    let total: f64 = x.iter().sum();
                    if x.iter().all(|&v| v > margin) && total < 1.0 - margin {
                        pts.push(x);
                    }
                }
                pts
            }
        }
    }
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

/// The matrix of the worked 3-asset example.
pub fn example_matrix() -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &[5.0 / 3.0, 3.0, 0.0, 3.0, 7.0, 0.0, 0.0, 0.0, 1.0])
}

fn pair_1d(
    lambda: f64,
    x0: f64,
    eta: impl Fn(f64) -> f64 + Send + Sync + 'static,
    grad_log: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> Eigenpair {
    Eigenpair::new(
        lambda,
        vec![x0],
        Arc::new(move |x: &[f64]| eta(x[0])),
        Arc::new(move |x: &[f64], g: &mut [f64]| g[0] = grad_log(x[0])),
    )
    .expect("reference eigenpair is positive at its anchor")
}

/// All registry entries, in listing order.
pub fn all_examples() -> Vec<Example> {
    let mut out = Vec::new();

    out.push(Example {
        name: "ex-6.1.1",
        description: "c = x(1-x) on (0,1): eta = x(1-x), lambda = 1; tilted process is positive recurrent",
        domain: DomainSpec::interval(0.0, 1.0).unwrap(),
        covariance: Arc::new(Cov1d::with_orders(|x: f64| x * (1.0 - x), 1.0, 1.0)),
        pair: pair_1d(
            1.0,
            0.5,
            |x| x * (1.0 - x),
            |x| (1.0 - 2.0 * x) / (x * (1.0 - x)),
        ),
        x0: vec![0.5],
        epsilons: Some(vec![1e-3, 1e-4, 1e-5]),
        default_dt: 5e-4,
        default_absorb_level: 4,
        verify: VerifyRecipe {
            grid: GridRecipe::Uniform1d {
                lo: 0.05,
                hi: 0.95,
                n: 513,
            },
            h: 1e-4,
            threshold: 1e-5,
        },
    });

    out.push(Example {
        name: "ex-6.1.2",
        description: "c = x^2(1-x)^2 on (0,1): eta = sqrt(x(1-x)), lambda = 1/8; tilted process is null recurrent",
        domain: DomainSpec::interval(0.0, 1.0).unwrap(),
        covariance: Arc::new(Cov1d::with_orders(
            |x: f64| (x * (1.0 - x)).powi(2),
            2.0,
            2.0,
        )),
        pair: pair_1d(
            0.125,
            0.5,
            |x| (x * (1.0 - x)).sqrt(),
            |x| 0.5 * (1.0 - 2.0 * x) / (x * (1.0 - x)),
        ),
        x0: vec![0.5],
        epsilons: Some(vec![1e-6, 1e-8, 1e-10]),
        default_dt: 5e-4,
        default_absorb_level: 4,
        verify: VerifyRecipe {
            grid: GridRecipe::Uniform1d {
                lo: 0.05,
                hi: 0.95,
                n: 513,
            },
            h: 1e-4,
            threshold: 1e-5,
        },
    });

    out.push(Example {
        name: "ex-6.1.3",
        description: "c = x^3(1-x)^3 on (0,1): lambda = 0, any positive affine eta qualifies (uses eta = 1)",
        domain: DomainSpec::interval(0.0, 1.0).unwrap(),
        covariance: Arc::new(Cov1d::with_orders(
            |x: f64| (x * (1.0 - x)).powi(3),
            3.0,
            3.0,
        )),
        pair: pair_1d(0.0, 0.5, |_| 1.0, |_| 0.0),
        x0: vec![0.5],
        epsilons: Some(vec![1e-3, 1e-4, 1e-5]),
        default_dt: 5e-4,
        default_absorb_level: 4,
        verify: VerifyRecipe {
            grid: GridRecipe::Uniform1d {
                lo: 0.05,
                hi: 0.95,
                n: 513,
            },
            h: 1e-4,
            threshold: 1e-5,
        },
    });

    let xhat = *LOG_INTEGRAL_ROOT;
    out.push(Example {
        name: "ex-6.1.4",
        description: "c = -2x log(x) J(x) on (0, 0.752) with J(x) = int_0^x log(-log y) dy: eta = J, lambda = 1; 1/eta is not integrable under the invariant law",
        domain: DomainSpec::interval(0.0, xhat).unwrap(),
        covariance: Arc::new(Cov1d::with_orders(
            |x: f64| -2.0 * x * x.ln() * int_log_neg_log(x),
            2.0,
            1.0,
        )),
        pair: pair_1d(
            1.0,
            0.375,
            int_log_neg_log,
            |x| (-x.ln()).ln() / int_log_neg_log(x),
        ),
        x0: vec![0.375],
        epsilons: Some(vec![1e-4, 1e-6, 1e-8]),
        default_dt: 2e-4,
        default_absorb_level: 4,
        verify: VerifyRecipe {
            grid: GridRecipe::Uniform1d {
                lo: 0.05,
                hi: 0.70,
                n: 513,
            },
            h: 1e-4,
            threshold: 1e-5,
        },
    });

    out.push(Example {
        name: "ex-6.1.5",
        description: "oscillatory covariance on (0, inf): eta = int_0^x cos(y^{-1/2}) dy + 4 sqrt(x) - x, lambda = 1; the gradient quadratic form oscillates near 0",
        domain: DomainSpec::orthant(1).unwrap(),
        covariance: Arc::new(Cov1d::new(|x: f64| {
            let s = (1.0 / x.sqrt()).sin();
            4.0 * (x.powf(1.5) * int_cos_inv_sqrt(x) + 4.0 * x * x - x.powf(2.5)) / (2.0 - s)
        })),
        pair: pair_1d(
            1.0,
            1.0,
            |x| int_cos_inv_sqrt(x) + 4.0 * x.sqrt() - x,
            |x| {
                let u = 1.0 / x.sqrt();
                (u.cos() + 2.0 * u - 1.0) / (int_cos_inv_sqrt(x) + 4.0 * x.sqrt() - x)
            },
        ),
        x0: vec![1.0],
        epsilons: None,
        default_dt: 1e-4,
        default_absorb_level: 20,
        verify: VerifyRecipe {
            grid: GridRecipe::Uniform1d {
                lo: 0.5,
                hi: 50.0,
                n: 1000,
            },
            h: 1e-3,
            threshold: 1e-4,
        },
    });

    let gbm = GbmSpec::new(example_matrix()).expect("example matrix is SPD");
    let gbm_x0 = vec![1.0, 1.0, 1.0];
    let mut gbm_domain = gbm.domain();
    // long growth horizons need the synthetic outer boundary far out of reach
    gbm_domain.outer_radius = 1e150;
    out.push(Example {
        name: "gbm-6.2.1",
        description: "correlated geometric Brownian motion, 3 assets: eta = prod x_i^{b_i} with b = (-7/4, 5/4, 1/2), lambda = 19/12",
        domain: gbm_domain,
        covariance: gbm.covariance(),
        pair: gbm.eigenpair(&gbm_x0).expect("x0 in the orthant"),
        x0: gbm_x0,
        epsilons: None,
        default_dt: 2.5e-4,
        default_absorb_level: 4,
        verify: VerifyRecipe {
            grid: GridRecipe::HaltonBox {
                lo: 0.5,
                hi: 2.0,
                n: 1000,
            },
            h: 1e-4,
            threshold: 1e-5,
        },
    });

    let simplex = SimplexSpec::new(example_matrix()).expect("example matrix is SPD");
    let simplex_x0 = vec![0.25, 0.25];
    out.push(Example {
        name: "simplex-6.2.1",
        description: "relative capitalizations of the 3-asset model on the open simplex: eta = y(1-x-y)/x, lambda = 4/3",
        domain: simplex.domain(),
        covariance: simplex.covariance(),
        pair: simplex.eigenpair(&simplex_x0).expect("x0 in the simplex"),
        x0: simplex_x0,
        epsilons: None,
        default_dt: 2.5e-4,
        default_absorb_level: 6,
        verify: VerifyRecipe {
            grid: GridRecipe::HaltonSimplex { margin: 0.05, n: 1000 },
            h: 1e-4,
            threshold: 1e-5,
        },
    });

    out.push(Example {
        name: "bessel-4.3",
        description: "driftless unit covariance on (0, inf): survival 2 Phi(x/sqrt(t)) - 1; eta = x (lambda = 0) tilts to the 3-d Bessel process",
        domain: DomainSpec::orthant(1).unwrap(),
        covariance: Arc::new(Cov1d::with_orders(|_| 1.0, 0.0, 0.0)),
        pair: pair_1d(0.0, 1.0, |x| x, |x| 1.0 / x),
        x0: vec![1.0],
        epsilons: None,
        default_dt: 1e-4,
        default_absorb_level: 20,
        verify: VerifyRecipe {
            grid: GridRecipe::Uniform1d {
                lo: 0.5,
                hi: 50.0,
                n: 513,
            },
            h: 1e-4,
            threshold: 1e-10,
        },
    });

    out
}

pub fn find(name: &str) -> Option<Example> {
    all_examples().into_iter().find(|e| e.name == name)
}

pub fn names() -> Vec<&'static str> {
    all_examples().iter().map(|e| e.name).collect()
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct VerifyOutcome {
    pub name: String,
    pub lambda: f64,
    pub residual_max: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Run an entry's eigenpair through the finite-difference residual on its
/// verification grid.
pub fn verify_example(ex: &Example) -> Result<VerifyOutcome, ClosedFormError> {
    let grid = ex.verify.grid.points(ex.domain.dim());
    let residual = pde_residual(
        &ex.pair,
        ex.covariance.as_ref(),
        &ex.domain,
        &grid,
        ex.verify.h,
    )?;
    Ok(VerifyOutcome {
        name: ex.name.to_string(),
        lambda: ex.pair.lambda,
        residual_max: residual,
        threshold: ex.verify.threshold,
        pass: residual < ex.verify.threshold,
    })
}
