//! One-dimensional generalized principal eigenvalue solver and the
//! pointwise/integral/recurrence classification tests.
//!
//! The eigenvalue problem `(1/2) c(x) eta'' = -lambda eta` on a bounded
//! interval `(alpha, beta)` is solved by shooting on epsilon-truncated
//! subintervals: integrate the initial-value problem from
//! `eta(alpha+eps) = 0, eta'(alpha+eps) = 1` with an adaptive Runge-Kutta
//! scheme, locate the smallest `lambda` with `eta(beta-eps) = 0` by Sturm
//! oscillation counting plus bisection, and remove the truncation bias by
//! Richardson extrapolation in epsilon. The extrapolation model depends on
//! the endpoint degeneracy order `p` of `c`: for `p < 2` the truncated
//! eigenvalue converges linearly in epsilon, while for `p = 2` it converges
//! like `1/log^2(1/eps)`, so the model variable switches accordingly.
//!
//! The eigenfunction is tabulated separately by integrating at the
//! extrapolated eigenvalue from local power-law (Frobenius) initial data at
//! the smallest epsilon offset; this keeps the tabulated shape free of the
//! logarithmic contamination that a hard Dirichlet start introduces at
//! order-2 endpoints.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::interp::{chebyshev_nodes, PchipCurve};
use crate::model::{estimate_endpoint_orders, CovarianceField, Eigenpair, ModelError};
use crate::quad::{integrate, QuadError};

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("eigen1d: {0}")]
    BadInput(String),
    #[error("eigen1d: no sign change of eta(beta-eps) in the bracket [{lo:.3e}, {hi:.3e}] (eta stays {side} over the whole bracket)")]
    BracketFailure { lo: f64, hi: f64, side: &'static str },
    #[error("eigen1d: ODE step underflow near a singular coefficient at x = {x:.6e} ({detail}); increase epsilon")]
    Singularity { x: f64, detail: String },
    #[error("eigen1d: per-epsilon eigenvalue sequence must be non-increasing (domain monotonicity): lambda({eps_coarse:.1e}) = {lam_coarse:.8e} < lambda({eps_fine:.1e}) = {lam_fine:.8e} beyond tol")]
    NonMonotone { eps_coarse: f64, lam_coarse: f64, eps_fine: f64, lam_fine: f64 },
    #[error("eigen1d: integration did not converge: {0}")]
    NonConvergence(String),
    #[error("eigen1d: classification tests returned contradictory definite verdicts: {0}")]
    Contradiction(String),
    #[error("eigen1d: invariant density normalization diverges under grid refinement (integral grew from {coarse:.4e} to {fine:.4e}); recurrence class is misclassified")]
    DensityContradiction { coarse: f64, fine: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// Tolerances and bracket for the shooting solver.
#[derive(Debug, Clone, Copy)]
pub struct ShootConfig {
    /// Local relative error of the adaptive Runge-Kutta integration.
    pub ode_rtol: f64,
    /// Bisection width at which the eigenvalue is accepted.
    pub lambda_tol: f64,
    /// Upper end of the eigenvalue bracket; `None` uses `1e3/(beta-alpha)^2`.
    pub lambda_max: Option<f64>,
}

impl Default for ShootConfig {
    fn default() -> Self {
        Self {
            ode_rtol: 1e-10,
            lambda_tol: 1e-9,
            lambda_max: None,
        }
    }
}

// ---------------------------------------------------------------------------
// Adaptive Cash-Karp RK45 for the 2-state system (eta, eta').
// ---------------------------------------------------------------------------

struct Integration {
    end_state: [f64; 2],
    zero_crossings: usize,
}

/// Integrate `eta'' = -2 lambda eta / c(x)` from `(x0, y0)` to `x1`,
/// clipping steps so that every point of `samples` (sorted, inside the span)
/// is hit exactly; `on_sample` receives `(x, eta, eta')` there.
///
/// `stop_on_crossing` aborts early once eta changes sign, which is all the
/// oscillation count needs during bisection.
#[allow(clippy::too_many_arguments)]
fn integrate_eta(
    c: &dyn CovarianceField,
    lambda: f64,
    x0: f64,
    x1: f64,
    y0: [f64; 2],
    rtol: f64,
    samples: &[f64],
    mut on_sample: impl FnMut(f64, [f64; 2]),
    stop_on_crossing: bool,
) -> Result<Integration, EigenError> {
    // Cash-Karp tableau
    const A2: f64 = 1.0 / 5.0;
    const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
    const A4: [f64; 3] = [3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0];
    const A5: [f64; 4] = [-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0];
    const A6: [f64; 5] = [
        1631.0 / 55296.0,
        175.0 / 512.0,
        575.0 / 13824.0,
        44275.0 / 110592.0,
        253.0 / 4096.0,
    ];
    const B5: [f64; 6] = [
        37.0 / 378.0,
        0.0,
        250.0 / 621.0,
        125.0 / 594.0,
        0.0,
        512.0 / 1771.0,
    ];
    const B4: [f64; 6] = [
        2825.0 / 27648.0,
        0.0,
        18575.0 / 48384.0,
        13525.0 / 55296.0,
        277.0 / 14336.0,
        1.0 / 4.0,
    ];

    let width = x1 - x0;
    if width <= 0.0 {
        return Err(EigenError::BadInput("integration span is empty".into()));
    }
    let rhs = |x: f64, y: &[f64; 2]| -> Result<[f64; 2], EigenError> {
        let cx = c.scalar(x);
        if !(cx > 0.0) {
            return Err(EigenError::Singularity {
                x,
                detail: format!("c(x) = {cx:.3e} is not positive"),
            });
        }
        Ok([y[1], -2.0 * lambda * y[0] / cx])
    };

    let mut x = x0;
    let mut y = y0;
    // start near the left offset scale so singular left endpoints are entered gently
    let mut h = (0.1 * (x0 - left_anchor_guess(x0, width))).max(1e-4 * width).min(width);
    let mut next_sample = 0usize;
    while next_sample < samples.len() && samples[next_sample] <= x0 + 1e-300 {
        on_sample(samples[next_sample], y);
        next_sample += 1;
    }
    let mut zero_crossings = 0usize;
    let mut sign_prev = sign_of(y[0]);
    let mut steps = 0usize;
    const MAX_STEPS: usize = 4_000_000;

    while x < x1 - 1e-13 * width {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(EigenError::NonConvergence(format!(
                "step budget exhausted at x = {x:.6e}"
            )));
        }
        let mut clipped = false;
        let mut h_try = h;
        if next_sample < samples.len() && x + h_try >= samples[next_sample] {
            h_try = samples[next_sample] - x;
            clipped = true;
        }
        if x + h_try > x1 {
            h_try = x1 - x;
            clipped = true;
        }
        if h_try < 1e-15 * (x.abs() + width) {
            // sample coincides with current x up to round-off
            if next_sample < samples.len() && (samples[next_sample] - x).abs() <= 1e-12 * width {
                on_sample(samples[next_sample], y);
                next_sample += 1;
                continue;
            }
            return Err(EigenError::Singularity {
                x,
                detail: format!("step size underflow (h = {h_try:.3e})"),
            });
        }

        let k1 = rhs(x, &y)?;
        let y2 = [y[0] + h_try * A2 * k1[0], y[1] + h_try * A2 * k1[1]];
        let k2 = rhs(x + h_try / 5.0, &y2)?;
        let y3 = [
            y[0] + h_try * (A3[0] * k1[0] + A3[1] * k2[0]),
            y[1] + h_try * (A3[0] * k1[1] + A3[1] * k2[1]),
        ];
        let k3 = rhs(x + 0.3 * h_try, &y3)?;
        let y4 = [
            y[0] + h_try * (A4[0] * k1[0] + A4[1] * k2[0] + A4[2] * k3[0]),
            y[1] + h_try * (A4[0] * k1[1] + A4[1] * k2[1] + A4[2] * k3[1]),
        ];
        let k4 = rhs(x + 0.6 * h_try, &y4)?;
        let y5 = [
            y[0] + h_try * (A5[0] * k1[0] + A5[1] * k2[0] + A5[2] * k3[0] + A5[3] * k4[0]),
            y[1] + h_try * (A5[0] * k1[1] + A5[1] * k2[1] + A5[2] * k3[1] + A5[3] * k4[1]),
        ];
        let k5 = rhs(x + h_try, &y5)?;
        let y6 = [
            y[0] + h_try
                * (A6[0] * k1[0] + A6[1] * k2[0] + A6[2] * k3[0] + A6[3] * k4[0] + A6[4] * k5[0]),
            y[1] + h_try
                * (A6[0] * k1[1] + A6[1] * k2[1] + A6[2] * k3[1] + A6[3] * k4[1] + A6[4] * k5[1]),
        ];
        let k6 = rhs(x + 0.875 * h_try, &y6)?;

        let mut y_new = [0.0; 2];
        let mut y_low = [0.0; 2];
        let ks = [k1, k2, k3, k4, k5, k6];
        for i in 0..2 {
            let mut acc5 = 0.0;
            let mut acc4 = 0.0;
            for (j, k) in ks.iter().enumerate() {
                acc5 += B5[j] * k[i];
                acc4 += B4[j] * k[i];
            }
            y_new[i] = y[i] + h_try * acc5;
            y_low[i] = y[i] + h_try * acc4;
        }
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let scale = y[i].abs().max(y_new[i].abs()) + h_try * ks[0][i].abs() + 1e-290;
            err = err.max((y_new[i] - y_low[i]).abs() / scale);
        }

        if err <= rtol {
            x += h_try;
            y = y_new;
            let s = sign_of(y[0]);
            if s != 0 && sign_prev != 0 && s != sign_prev {
                zero_crossings += 1;
                if stop_on_crossing {
                    return Ok(Integration {
                        end_state: y,
                        zero_crossings,
                    });
                }
            }
            if s != 0 {
                sign_prev = s;
            }
            if clipped && next_sample < samples.len()
                && (x - samples[next_sample]).abs() <= 1e-12 * width
            {
                on_sample(samples[next_sample], y);
                next_sample += 1;
            }
            let grow = 0.9 * (rtol / err.max(1e-300)).powf(0.2);
            h = h_try * grow.clamp(0.2, 5.0);
        } else {
            let shrink = 0.9 * (rtol / err).powf(0.25);
            h = h_try * shrink.clamp(0.1, 0.9);
        }
    }
    // flush samples that sit at the right end within round-off
    while next_sample < samples.len() {
        if (samples[next_sample] - x1).abs() <= 1e-12 * width {
            on_sample(samples[next_sample], y);
            next_sample += 1;
        } else {
            break;
        }
    }
    Ok(Integration {
        end_state: y,
        zero_crossings,
    })
}

#[inline]
fn sign_of(v: f64) -> i32 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

#[inline]
fn left_anchor_guess(x0: f64, width: f64) -> f64 {
    // heuristic distance of the start point from the singular endpoint, used
    // only to seed the first step size
    x0 - 1e-3 * width
}

// ---------------------------------------------------------------------------
// Shooting
// ---------------------------------------------------------------------------

enum ShotClass {
    TooLow,
    TooHigh,
}

fn classify_shot(
    c: &dyn CovarianceField,
    lambda: f64,
    a: f64,
    b: f64,
    rtol: f64,
) -> Result<ShotClass, EigenError> {
    let out = integrate_eta(c, lambda, a, b, [0.0, 1.0], rtol, &[], |_, _| {}, true)?;
    if out.zero_crossings >= 1 || out.end_state[0] < 0.0 {
        Ok(ShotClass::TooHigh)
    } else {
        Ok(ShotClass::TooLow)
    }
}

/// Smallest `lambda > 0` whose initial-value solution from
/// `eta(alpha+eps) = 0, eta'(alpha+eps) = 1` vanishes again at `beta-eps`,
/// located by oscillation counting and bisection to `cfg.lambda_tol`.
///
/// `eps = 0` is admissible when `c` is regular (positive up to the
/// endpoints); singular coefficients need `eps > 0` and fail with a
/// singularity error otherwise.
pub fn shoot_eigenvalue(
    c: &dyn CovarianceField,
    interval: (f64, f64),
    epsilon: f64,
    cfg: &ShootConfig,
) -> Result<f64, EigenError> {
    let (alpha, beta) = interval;
    let width = beta - alpha;
    if !(width > 0.0 && width.is_finite()) {
        return Err(EigenError::BadInput(format!(
            "interval ({alpha}, {beta}) is not a bounded interval"
        )));
    }
    if !(epsilon >= 0.0 && epsilon < width / 4.0) {
        return Err(EigenError::BadInput(format!(
            "epsilon must lie in [0, (beta-alpha)/4); got {epsilon}"
        )));
    }
    let a = alpha + epsilon;
    let b = beta - epsilon;
    let lambda_max = cfg.lambda_max.unwrap_or(1e3 / (width * width));
    let mut lo = cfg.lambda_tol.max(1e-12);
    let mut hi = lambda_max;
    match classify_shot(c, lo, a, b, cfg.ode_rtol)? {
        ShotClass::TooHigh => {
            return Err(EigenError::BracketFailure {
                lo,
                hi,
                side: "negative (eigenvalue below the lower bracket)",
            })
        }
        ShotClass::TooLow => {}
    }
    match classify_shot(c, hi, a, b, cfg.ode_rtol)? {
        ShotClass::TooLow => {
            return Err(EigenError::BracketFailure {
                lo,
                hi,
                side: "positive (eigenvalue above lambda_max)",
            })
        }
        ShotClass::TooHigh => {}
    }
    while hi - lo > cfg.lambda_tol {
        let mid = 0.5 * (lo + hi);
        match classify_shot(c, mid, a, b, cfg.ode_rtol)? {
            ShotClass::TooLow => lo = mid,
            ShotClass::TooHigh => hi = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// Full solve: per-epsilon eigenvalues, extrapolation, tabulation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExtrapolationModel {
    /// `lambda(eps) ~ lambda* + A eps + B eps^2` (endpoint orders below 2).
    PolynomialEps,
    /// `lambda(eps) ~ lambda* + A/L^2 + B/L^3`, `L = log(1/eps)` (an endpoint
    /// of order >= 2).
    LogSquared,
}

/// Result of [`solve_principal_eigenpair`]: the normalized eigenpair plus the
/// evidence that produced it.
pub struct EigenSolution {
    pub pair: Eigenpair,
    pub per_epsilon: Vec<(f64, f64)>,
    pub residual_max: f64,
    pub model: ExtrapolationModel,
    pub endpoint_orders: (f64, f64),
    /// Eigenfunction table (abscissae kept for consistency tests).
    pub table: Arc<EigenTable>,
}

pub struct EigenTable {
    pub eta: PchipCurve,
    pub grad_log: PchipCurve,
}

const TABLE_NODES: usize = 4097;
const RESIDUAL_POINTS: usize = 513;
const RESIDUAL_STEP: f64 = 1e-4;

/// Solve the principal eigenpair on a bounded interval.
///
/// Runs [`shoot_eigenvalue`] for every epsilon (strictly decreasing, at least
/// three values), checks domain monotonicity of the truncated eigenvalues,
/// Richardson-extrapolates to `lambda_hat`, and tabulates the eigenfunction
/// at `lambda_hat` on a Chebyshev grid of 4097 interior points with monotone
/// cubic interpolation for `eta` and `d(log eta)/dx`.
pub fn solve_principal_eigenpair(
    c: &dyn CovarianceField,
    interval: (f64, f64),
    epsilons: &[f64],
    cfg: &ShootConfig,
    x0: Option<f64>,
) -> Result<EigenSolution, EigenError> {
    let (alpha, beta) = interval;
    let width = beta - alpha;
    if epsilons.len() < 3 {
        return Err(EigenError::BadInput(format!(
            "need at least 3 epsilons, got {}",
            epsilons.len()
        )));
    }
    if !epsilons.windows(2).all(|w| w[1] < w[0]) {
        return Err(EigenError::BadInput(
            "epsilons must be strictly decreasing".into(),
        ));
    }
    if epsilons[0] >= width / 4.0 || *epsilons.last().unwrap() <= 0.0 {
        return Err(EigenError::BadInput(format!(
            "epsilons must lie in (0, (beta-alpha)/4); got range [{:.3e}, {:.3e}]",
            epsilons.last().unwrap(),
            epsilons[0]
        )));
    }

    let mut per_epsilon = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let lam = shoot_eigenvalue(c, interval, eps, cfg)?;
        per_epsilon.push((eps, lam));
    }
    // domain monotonicity: smaller eps -> larger domain -> smaller eigenvalue
    let mono_tol = cfg.lambda_tol.max(1e-12);
    for w in per_epsilon.windows(2) {
        let (eps_c, lam_c) = w[0];
        let (eps_f, lam_f) = w[1];
        if lam_f > lam_c + 10.0 * mono_tol {
            return Err(EigenError::NonMonotone {
                eps_coarse: eps_c,
                lam_coarse: lam_c,
                eps_fine: eps_f,
                lam_fine: lam_f,
            });
        }
    }

    let orders = c
        .endpoint_orders()
        .unwrap_or_else(|| estimate_endpoint_orders(c, alpha, beta));
    let model = if orders.0.max(orders.1) >= 1.9 {
        ExtrapolationModel::LogSquared
    } else {
        ExtrapolationModel::PolynomialEps
    };
    let k = per_epsilon.len();
    let last3 = &per_epsilon[k - 3..];
    let lambda_hat = extrapolate(last3, model);
    let lam_min_eps = per_epsilon.last().unwrap().1;
    // the extrapolated value can never exceed the finest truncated eigenvalue
    let lambda_hat = lambda_hat.min(lam_min_eps).max(0.0);

    let eps_min = *epsilons.last().unwrap();
    let (table, residual_max) =
        tabulate(c, interval, lambda_hat, eps_min, cfg, orders)?;
    let table = Arc::new(table);

    let anchor = x0.unwrap_or(0.5 * (alpha + beta));
    if !(anchor > alpha + eps_min && anchor < beta - eps_min) {
        return Err(EigenError::BadInput(format!(
            "normalization anchor {anchor} outside the tabulated interior"
        )));
    }
    let t_eta = Arc::clone(&table);
    let t_grad = Arc::clone(&table);
    let pair = Eigenpair::new(
        lambda_hat,
        vec![anchor],
        Arc::new(move |x: &[f64]| t_eta.eta.eval(x[0])),
        Arc::new(move |x: &[f64], g: &mut [f64]| {
            g[0] = t_grad.grad_log.eval(x[0]);
        }),
    )?;

    Ok(EigenSolution {
        pair,
        per_epsilon,
        residual_max,
        model,
        endpoint_orders: orders,
        table,
    })
}

fn extrapolate(last3: &[(f64, f64)], model: ExtrapolationModel) -> f64 {
    let (e0, l0) = last3[0];
    let (e1, l1) = last3[1];
    let (e2, l2) = last3[2];
    let (u0, u1, u2) = match model {
        ExtrapolationModel::PolynomialEps => (e0, e1, e2),
        ExtrapolationModel::LogSquared => {
            let l = |e: f64| 1.0 / (1.0 / e).ln().powi(2);
            (l(e0), l(e1), l(e2))
        }
    };
    // solve [1, u, u^{3/2 or 2}] x = lam for the constant term
    let p = match model {
        ExtrapolationModel::PolynomialEps => 2.0,
        ExtrapolationModel::LogSquared => 1.5,
    };
    let m = [
        [1.0, u0, u0.powf(p)],
        [1.0, u1, u1.powf(p)],
        [1.0, u2, u2.powf(p)],
    ];
    let rhs = [l0, l1, l2];
    match solve3(m, rhs) {
        Some(sol) if sol[0].is_finite() => sol[0],
        _ => l2,
    }
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| {
            m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()
        })?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in (row + 1)..3 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

/// Tabulate the eigenfunction at `lambda_hat` by integrating from local
/// power-law initial data `eta ~ (x-alpha)^q` at offset `eps_min`, where `q`
/// solves the indicial equation `q(q-1) + 2 lambda (x-alpha)^2 / c = 0` at
/// the offset (clamped to the real branch). Returns the table plus the
/// maximum relative PDE residual over a uniform verification grid covering
/// the interior 80% of the interval, with second derivatives taken by
/// central differences of tabulated values at step 1e-4.
fn tabulate(
    c: &dyn CovarianceField,
    interval: (f64, f64),
    lambda_hat: f64,
    eps_min: f64,
    cfg: &ShootConfig,
    _orders: (f64, f64),
) -> Result<(EigenTable, f64), EigenError> {
    let (alpha, beta) = interval;
    let width = beta - alpha;
    let a = alpha + eps_min;
    let b = beta - eps_min;

    let kappa = 2.0 * lambda_hat * eps_min * eps_min / c.scalar(a);
    let disc = (1.0 - 4.0 * kappa).max(0.0);
    let q = 0.5 * (1.0 + disc.sqrt());
    let y0 = [1.0, q / eps_min];

    let nodes = chebyshev_nodes(a, b, TABLE_NODES);
    // residual verification points with +/- h companions, merged and sorted
    let lo80 = alpha + 0.1 * width;
    let hi80 = beta - 0.1 * width;
    let h = RESIDUAL_STEP * width;
    let mut verif = Vec::with_capacity(RESIDUAL_POINTS);
    for i in 0..RESIDUAL_POINTS {
        let x = lo80 + (hi80 - lo80) * i as f64 / (RESIDUAL_POINTS - 1) as f64;
        verif.push(x);
    }
    let mut samples: Vec<f64> = nodes.clone();
    for &x in &verif {
        samples.push(x - h);
        samples.push(x);
        samples.push(x + h);
    }
    samples.sort_by(|p, q| p.partial_cmp(q).unwrap());
    samples.dedup_by(|p, q| (*p - *q).abs() < 1e-15 * width);

    let mut recorded: Vec<(f64, f64, f64)> = Vec::with_capacity(samples.len());
    let rtol = (cfg.ode_rtol * 1e-2).max(1e-13);
    integrate_eta(
        c,
        lambda_hat,
        a,
        b,
        y0,
        rtol,
        &samples,
        |x, y| recorded.push((x, y[0], y[1])),
        false,
    )?;

    // positivity holds because lambda_hat does not exceed the truncated
    // eigenvalue; a violation means the extrapolation overshot
    if recorded.iter().any(|&(_, eta, _)| !(eta > 0.0)) {
        return Err(EigenError::NonConvergence(
            "tabulated eigenfunction is not strictly positive; extrapolated eigenvalue overshot the truncated one".into(),
        ));
    }

    // scale to a sane magnitude before building curves (deep offsets make the
    // raw solution tiny); normalization proper happens in Eigenpair
    let mid_val = recorded[recorded.len() / 2].1;
    let scale = 1.0 / mid_val;

    let mut node_x = Vec::with_capacity(TABLE_NODES);
    let mut node_eta = Vec::with_capacity(TABLE_NODES);
    let mut node_gl = Vec::with_capacity(TABLE_NODES);
    let mut verif_vals: Vec<(f64, f64)> = Vec::with_capacity(3 * RESIDUAL_POINTS);
    let mut node_iter = nodes.iter().peekable();
    for &(x, eta, etap) in &recorded {
        if let Some(&&nx) = node_iter.peek() {
            if (x - nx).abs() <= 1e-12 * width {
                node_x.push(x);
                node_eta.push(eta * scale);
                node_gl.push(etap / eta);
                node_iter.next();
            }
        }
        verif_vals.push((x, eta * scale));
    }
    if node_x.len() != TABLE_NODES {
        return Err(EigenError::NonConvergence(format!(
            "tabulation recorded {} of {} nodes",
            node_x.len(),
            TABLE_NODES
        )));
    }

    // residual by central differences over the verification triples
    let lookup = |x: f64| -> Option<f64> {
        let idx = verif_vals
            .binary_search_by(|probe| probe.0.partial_cmp(&x).unwrap());
        match idx {
            Ok(i) => Some(verif_vals[i].1),
            Err(i) => {
                for j in [i.saturating_sub(1), i, i + 1] {
                    if j < verif_vals.len() && (verif_vals[j].0 - x).abs() <= 2e-12 * width {
                        return Some(verif_vals[j].1);
                    }
                }
                None
            }
        }
    };
    let mut residual_max: f64 = 0.0;
    for &x in &verif {
        let (em, e0, ep) = match (lookup(x - h), lookup(x), lookup(x + h)) {
            (Some(a_), Some(b_), Some(c_)) => (a_, b_, c_),
            _ => continue,
        };
        let second = (ep - 2.0 * e0 + em) / (h * h);
        let r = (0.5 * c.scalar(x) * second + lambda_hat * e0).abs() / e0;
        residual_max = residual_max.max(r);
    }

    let eta_curve = PchipCurve::new(node_x.clone(), node_eta);
    let gl_curve = PchipCurve::new(node_x, node_gl);
    Ok((
        EigenTable {
            eta: eta_curve,
            grad_log: gl_curve,
        },
        residual_max,
    ))
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSign {
    Positive,
    Zero,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrenceClass {
    TransientToAlpha,
    TransientToBeta,
    TransientBoth,
    NullRecurrent,
    PositiveRecurrent,
    Unknown,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvidenceItem {
    pub test: String,
    pub value: f64,
    pub verdict: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub lambda_sign: LambdaSign,
    pub evidence: Vec<EvidenceItem>,
    pub explosion: (bool, bool),
    pub recurrence_class: RecurrenceClass,
}

/// Exponent margin below which estimated endpoint orders are not trusted to
/// decide a strict inequality.
const ORDER_MARGIN: f64 = 0.05;

pub struct PointwiseOutcome {
    pub verdict: LambdaSign,
    /// Lower bound `(beta-alpha)^2 / (8 sup s)` when the verdict is positive.
    pub lambda_lower_bound: Option<f64>,
    pub sup_s: f64,
}

/// Pointwise test: `s(x) = (x-alpha)^2 (beta-x)^2 / c(x)` bounded implies
/// `lambda* > 0`; `(x-alpha)^2/c -> inf` at an endpoint implies
/// `lambda* = 0`.
pub fn pointwise_test(
    c: &dyn CovarianceField,
    interval: (f64, f64),
    grid_size: usize,
) -> Result<PointwiseOutcome, EigenError> {
    if grid_size < 256 {
        return Err(EigenError::BadInput(format!(
            "pointwise grid must have at least 256 points, got {grid_size}"
        )));
    }
    let (alpha, beta) = interval;
    let width = beta - alpha;
    let orders = c
        .endpoint_orders()
        .unwrap_or_else(|| estimate_endpoint_orders(c, alpha, beta));

    // grid refined geometrically toward both endpoints plus a uniform interior
    let mut sup_s: f64 = 0.0;
    let per_side = grid_size / 4;
    let mut eval = |x: f64| {
        let cx = c.scalar(x);
        if cx > 0.0 {
            let s = (x - alpha).powi(2) * (beta - x).powi(2) / cx;
            if s > sup_s {
                sup_s = s;
            }
        }
    };
    for k in 0..per_side {
        let t = 1e-10 * f64::powf(1e8, k as f64 / (per_side as f64 - 1.0));
        eval(alpha + width * t);
        eval(beta - width * t);
    }
    for k in 1..(grid_size / 2) {
        eval(alpha + width * k as f64 / (grid_size / 2) as f64);
    }

    let zero_at_alpha = orders.0 > 2.0 + ORDER_MARGIN;
    let zero_at_beta = orders.1 > 2.0 + ORDER_MARGIN;
    if zero_at_alpha || zero_at_beta {
        return Ok(PointwiseOutcome {
            verdict: LambdaSign::Zero,
            lambda_lower_bound: None,
            sup_s,
        });
    }
    let bounded = orders.0 < 2.0 + ORDER_MARGIN
        && orders.1 < 2.0 + ORDER_MARGIN
        && sup_s.is_finite()
        && sup_s < 1e12 * width.powi(4);
    if bounded {
        Ok(PointwiseOutcome {
            verdict: LambdaSign::Positive,
            lambda_lower_bound: Some(width * width / (8.0 * sup_s)),
            sup_s,
        })
    } else {
        Ok(PointwiseOutcome {
            verdict: LambdaSign::Inconclusive,
            lambda_lower_bound: None,
            sup_s,
        })
    }
}

pub struct IntegralOutcome {
    pub verdict: LambdaSign,
    /// Interior part of `int (x-alpha)(beta-x)/c dx` when it exists.
    pub interior_integral: Option<f64>,
}

/// Integral test: `int (x-alpha)(beta-x)/c dx < inf` implies `lambda* > 0`
/// (endpoint order `p < 2` at both ends); a divergent
/// `int (x-alpha)^2/c` (order `p >= 3`) implies `lambda* = 0`. Orders in
/// `[2, 3)` are undecided by this test.
pub fn integral_test(
    c: &dyn CovarianceField,
    interval: (f64, f64),
    quad_tol: f64,
) -> Result<IntegralOutcome, EigenError> {
    let (alpha, beta) = interval;
    let width = beta - alpha;
    let orders = c
        .endpoint_orders()
        .unwrap_or_else(|| estimate_endpoint_orders(c, alpha, beta));

    if orders.0 > 3.0 - ORDER_MARGIN || orders.1 > 3.0 - ORDER_MARGIN {
        return Ok(IntegralOutcome {
            verdict: LambdaSign::Zero,
            interior_integral: None,
        });
    }
    if orders.0 < 2.0 - ORDER_MARGIN && orders.1 < 2.0 - ORDER_MARGIN {
        let f = |x: f64| (x - alpha) * (beta - x) / c.scalar(x);
        let interior = integrate(&f, alpha + 1e-4 * width, beta - 1e-4 * width, quad_tol)?;
        return Ok(IntegralOutcome {
            verdict: LambdaSign::Positive,
            interior_integral: Some(interior),
        });
    }
    Ok(IntegralOutcome {
        verdict: LambdaSign::Inconclusive,
        interior_integral: None,
    })
}

/// Whether the driftless process can explode to (`alpha`, `beta`): finiteness
/// of `int (x-alpha)/c` near `alpha` and `int (beta-x)/c` near `beta`. The
/// integrand behaves like `(x-alpha)^{1-p}`, integrable iff `p < 2`.
pub fn explosion_test(
    c: &dyn CovarianceField,
    interval: (f64, f64),
    x0: f64,
) -> Result<(bool, bool), EigenError> {
    let (alpha, beta) = interval;
    if !(x0 > alpha && x0 < beta) {
        return Err(EigenError::BadInput(format!(
            "x0 = {x0} is not interior to ({alpha}, {beta})"
        )));
    }
    let orders = c
        .endpoint_orders()
        .unwrap_or_else(|| estimate_endpoint_orders(c, alpha, beta));
    Ok((
        orders.0 < 2.0 - ORDER_MARGIN,
        orders.1 < 2.0 - ORDER_MARGIN,
    ))
}

/// Finiteness of an endpoint integral decided by probing
/// `I(delta) = int_{endpoint + delta}^{mid} f` on a geometric ladder of
/// offsets and reading the growth exponent off the increments. Returns
/// `None` when the probe is inconsistent.
fn probe_endpoint_integral(
    f: &dyn Fn(f64) -> f64,
    endpoint: f64,
    mid: f64,
    width: f64,
) -> Option<bool> {
    let sign = if mid > endpoint { 1.0 } else { -1.0 };
    let deltas = [1e-3 * width, 1e-5 * width, 1e-7 * width];
    let mut vals = [0.0f64; 3];
    for (i, &d) in deltas.iter().enumerate() {
        let a = endpoint + sign * d;
        let (lo, hi) = if sign > 0.0 { (a, mid) } else { (mid, a) };
        vals[i] = integrate(&|x| f(x), lo, hi, 1e-9).ok()?;
        if !vals[i].is_finite() {
            return None;
        }
    }
    let d1 = vals[1] - vals[0];
    let d2 = vals[2] - vals[1];
    if d1.abs() < 1e-12 * vals[0].abs().max(1e-12) {
        return Some(true); // increments already negligible
    }
    if d2 <= 0.0 || d1 <= 0.0 {
        return Some(true);
    }
    // increments scale like delta^{1+e} over a ladder with ratio 1e-2
    let slope = (d2.ln() - d1.ln()) / (deltas[2].ln() - deltas[1].ln());
    let e = slope - 1.0;
    if e > -1.0 + 0.02 {
        Some(true)
    } else {
        Some(false)
    }
}

/// Recurrence class of the coordinate process under the eigenfunction tilt:
/// transient toward an endpoint where `int 1/eta^2` is finite, recurrent when
/// both diverge, positive recurrent when additionally `int eta^2/c < inf`.
pub fn recurrence_class(
    pair: &Eigenpair,
    c: &dyn CovarianceField,
    interval: (f64, f64),
) -> RecurrenceClass {
    let (alpha, beta) = interval;
    let width = beta - alpha;
    let mid = 0.5 * (alpha + beta);
    let inv_eta_sq = |x: f64| {
        let e = pair.eta(&[x]);
        1.0 / (e * e)
    };
    let fin_alpha = probe_endpoint_integral(&inv_eta_sq, alpha, mid, width);
    let fin_beta = probe_endpoint_integral(&inv_eta_sq, beta, mid, width);
    let (fa, fb) = match (fin_alpha, fin_beta) {
        (Some(a), Some(b)) => (a, b),
        _ => return RecurrenceClass::Unknown,
    };
    match (fa, fb) {
        (true, true) => RecurrenceClass::TransientBoth,
        (true, false) => RecurrenceClass::TransientToAlpha,
        (false, true) => RecurrenceClass::TransientToBeta,
        (false, false) => {
            let dens = |x: f64| {
                let e = pair.eta(&[x]);
                e * e / c.scalar(x)
            };
            let pa = probe_endpoint_integral(&dens, alpha, mid, width);
            let pb = probe_endpoint_integral(&dens, beta, mid, width);
            match (pa, pb) {
                (Some(true), Some(true)) => RecurrenceClass::PositiveRecurrent,
                (Some(_), Some(_)) => RecurrenceClass::NullRecurrent,
                _ => RecurrenceClass::Unknown,
            }
        }
    }
}

/// Invariant density of the positive-recurrent tilt, proportional to
/// `eta^2/c`, normalized by the trapezoid rule on a uniform interior grid.
/// Errors out when refinement toward the endpoints grows the normalization,
/// which signals a misclassified recurrence class.
pub fn invariant_density(
    pair: &Eigenpair,
    c: &dyn CovarianceField,
    interval: (f64, f64),
    grid_size: usize,
) -> Result<(Vec<f64>, Vec<f64>), EigenError> {
    let (alpha, beta) = interval;
    let width = beta - alpha;
    let f = |x: f64| {
        let e = pair.eta(&[x]);
        e * e / c.scalar(x)
    };
    let mass_with_margin = |margin: f64| -> f64 {
        let n = grid_size.max(129);
        let a = alpha + margin * width;
        let b = beta - margin * width;
        let mut acc = 0.0;
        let mut prev = f(a);
        for k in 1..n {
            let x = a + (b - a) * k as f64 / (n - 1) as f64;
            let v = f(x);
            acc += 0.5 * (prev + v) * (b - a) / (n - 1) as f64;
            prev = v;
        }
        acc
    };
    let coarse = mass_with_margin(1e-4);
    let fine = mass_with_margin(1e-6);
    if !coarse.is_finite() || !fine.is_finite() || fine > coarse * 1.05 {
        return Err(EigenError::DensityContradiction { coarse, fine });
    }

    let a = alpha + 1e-6 * width;
    let b = beta - 1e-6 * width;
    let xs: Vec<f64> = (0..grid_size)
        .map(|k| a + (b - a) * k as f64 / (grid_size - 1) as f64)
        .collect();
    let raw: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut mass = 0.0;
    for k in 1..grid_size {
        mass += 0.5 * (raw[k - 1] + raw[k]) * (xs[k] - xs[k - 1]);
    }
    let dens = raw.iter().map(|v| v / mass).collect();
    Ok((xs, dens))
}

/// Run the full classification battery; `pair` enables the recurrence class.
pub fn classify(
    c: &dyn CovarianceField,
    interval: (f64, f64),
    pair: Option<&Eigenpair>,
) -> Result<ClassificationReport, EigenError> {
    let pw = pointwise_test(c, interval, 1024)?;
    let it = integral_test(c, interval, 1e-9)?;
    if (pw.verdict == LambdaSign::Positive && it.verdict == LambdaSign::Zero)
        || (pw.verdict == LambdaSign::Zero && it.verdict == LambdaSign::Positive)
    {
        return Err(EigenError::Contradiction(format!(
            "pointwise = {:?}, integral = {:?}",
            pw.verdict, it.verdict
        )));
    }
    let lambda_sign = match (pw.verdict, it.verdict) {
        (LambdaSign::Positive, _) | (_, LambdaSign::Positive) => LambdaSign::Positive,
        (LambdaSign::Zero, _) | (_, LambdaSign::Zero) => LambdaSign::Zero,
        _ => LambdaSign::Inconclusive,
    };
    let mid = 0.5 * (interval.0 + interval.1);
    let explosion = explosion_test(c, interval, mid)?;
    let recurrence = pair
        .map(|p| recurrence_class(p, c, interval))
        .unwrap_or(RecurrenceClass::Unknown);
    let mut evidence = vec![
        EvidenceItem {
            test: "pointwise_sup_s".into(),
            value: pw.sup_s,
            verdict: format!("{:?}", pw.verdict),
        },
        EvidenceItem {
            test: "pointwise_lambda_lower_bound".into(),
            value: pw.lambda_lower_bound.unwrap_or(f64::NAN),
            verdict: format!("{:?}", pw.verdict),
        },
        EvidenceItem {
            test: "integral_interior".into(),
            value: it.interior_integral.unwrap_or(f64::NAN),
            verdict: format!("{:?}", it.verdict),
        },
    ];
    evidence.push(EvidenceItem {
        test: "explosion".into(),
        value: (explosion.0 as u8 + explosion.1 as u8) as f64,
        verdict: format!("alpha={}, beta={}", explosion.0, explosion.1),
    });
    Ok(ClassificationReport {
        lambda_sign,
        evidence,
        explosion,
        recurrence_class: recurrence,
    })
}
