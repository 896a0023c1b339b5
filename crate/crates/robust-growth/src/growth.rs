//! Wealth processes over simulated ensembles: the eigenpair-generated
//! process `V_t = exp(lambda t) eta(X_t)`, discrete stochastic-integral
//! wealth for arbitrary strategies, growth-rate estimation, the numeraire
//! (supermartingale-ratio) diagnostic, and the finite-horizon optimal
//! arbitrage with its convergence statistics.

use serde::Serialize;
use thiserror::Error;

use crate::model::{CovarianceField, DomainSpec, DriftField, Eigenpair};
use crate::sde::{simulate, Measure, PathEnsemble, SimConfig, SimError};
use crate::specfun::normal_cdf;

#[derive(Debug, Error)]
pub enum GrowthError {
    #[error("growth: {0}")]
    BadInput(String),
    #[error("growth: eigenfunction evaluation failed at an in-domain state of path {path}")]
    DomainEval { path: usize },
    #[error("growth: all paths were absorbed; no growth statistics exist")]
    AllAbsorbed,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// One wealth path on the ensemble's record grid. Values freeze at
/// absorption (of the underlying path, or of the wealth itself when it is
/// clipped at zero).
#[derive(Debug, Clone)]
pub struct WealthPath {
    pub values: Vec<f64>,
    /// Record index at which the path stopped evolving, if any.
    pub absorbed_at: Option<usize>,
}

/// Wealth paths sharing the record grid of the generating ensemble.
#[derive(Debug)]
pub struct WealthGrid {
    pub times: Vec<f64>,
    pub paths: Vec<WealthPath>,
}

/// `V_t = exp(lambda t) eta(X_t)` along every path. Absorbed paths carry the
/// last pre-absorption value, flagged.
pub fn wealth_star(pair: &Eigenpair, ens: &PathEnsemble) -> Result<WealthGrid, GrowthError> {
    let d = ens.dim;
    let mut paths = Vec::with_capacity(ens.n_paths());
    for (idx, p) in ens.paths.iter().enumerate() {
        let mut values = Vec::with_capacity(ens.times.len());
        let mut absorbed_at = None;
        let mut last = f64::NAN;
        for (k, &t) in ens.times.iter().enumerate() {
            match p.state_at(k, d) {
                Some(x) => {
                    let v = (pair.lambda * t).exp() * pair.eta(x);
                    if !v.is_finite() {
                        return Err(GrowthError::DomainEval { path: idx });
                    }
                    last = v;
                    values.push(v);
                }
                None => {
                    if absorbed_at.is_none() {
                        absorbed_at = Some(k);
                    }
                    values.push(last);
                }
            }
        }
        paths.push(WealthPath {
            values,
            absorbed_at,
        });
    }
    Ok(WealthGrid {
        times: ens.times.clone(),
        paths,
    })
}

/// A trading position as a function of the state and current wealth.
pub trait Strategy: Send + Sync {
    fn position_into(&self, x: &[f64], wealth: f64, out: &mut [f64]);
}

/// No position: wealth stays at 1.
pub struct ZeroStrategy;

impl Strategy for ZeroStrategy {
    fn position_into(&self, _x: &[f64], _wealth: f64, out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Constant-proportion strategy: fraction `pi_i` of wealth held in asset `i`.
pub struct ConstantProportion(pub Vec<f64>);

impl Strategy for ConstantProportion {
    fn position_into(&self, x: &[f64], wealth: f64, out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = self.0[i] * wealth / x[i];
        }
    }
}

/// The eigenpair-replicating position `theta = V grad log eta(X)`.
pub struct GradLogStrategy<'a>(pub &'a Eigenpair);

impl Strategy for GradLogStrategy<'_> {
    fn position_into(&self, x: &[f64], wealth: f64, out: &mut [f64]) {
        self.0.grad_log_eta_into(x, out);
        for v in out.iter_mut() {
            *v *= wealth;
        }
    }
}

/// Forward-Euler stochastic integral `V_{k+1} = V_k + theta(X_k,V_k)' (X_{k+1}
/// - X_k)` on the record grid, clipped at zero (wealth paths must stay
/// nonnegative; the first non-positive value absorbs the wealth path).
pub fn wealth_integrate(
    strategy: &dyn Strategy,
    ens: &PathEnsemble,
) -> Result<WealthGrid, GrowthError> {
    let d = ens.dim;
    let mut theta = vec![0.0; d];
    let mut paths = Vec::with_capacity(ens.n_paths());
    for p in &ens.paths {
        let n = ens.times.len();
        let mut values = Vec::with_capacity(n);
        let mut v = 1.0;
        values.push(v);
        let mut absorbed_at = None;
        for k in 1..n {
            if absorbed_at.is_some() {
                values.push(v);
                continue;
            }
            let (prev, next) = match (p.state_at(k - 1, d), p.state_at(k, d)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    absorbed_at = Some(k);
                    values.push(v);
                    continue;
                }
            };
            strategy.position_into(prev, v, &mut theta);
            let mut dv = 0.0;
            for i in 0..d {
                dv += theta[i] * (next[i] - prev[i]);
            }
            v += dv;
            if v <= 0.0 {
                v = 0.0;
                absorbed_at = Some(k);
            }
            values.push(v);
        }
        paths.push(WealthPath {
            values,
            absorbed_at,
        });
    }
    Ok(WealthGrid {
        times: ens.times.clone(),
        paths,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub horizon: f64,
    pub n_paths: usize,
    /// Paths dropped because the underlying state was absorbed.
    pub n_state_absorbed: usize,
    pub gamma_grid: Vec<f64>,
    /// Fraction of surviving paths with terminal `log(V)/t >= gamma`.
    pub fractions: Vec<f64>,
    /// Largest grid gamma with fraction at least 0.95.
    pub g_hat: f64,
    /// (probability, quantile) pairs of the terminal per-path growth.
    pub quantiles: Vec<(f64, f64)>,
}

const GROWTH_THRESHOLD: f64 = 0.95;

/// Terminal-horizon growth statistics: the gamma-curve of
/// `P[log(V_t)/t >= gamma]` and the 0.95-threshold estimate of the growth
/// rate. The threshold is a finite-sample proxy for the probability-one
/// limiting criterion; the full curve ships so no limit is claimed.
pub fn growth_rate(
    grid: &WealthGrid,
    gamma_grid: Option<&[f64]>,
) -> Result<GrowthReport, GrowthError> {
    let t = *grid
        .times
        .last()
        .ok_or_else(|| GrowthError::BadInput("empty time grid".into()))?;
    if !(t > 0.0) {
        return Err(GrowthError::BadInput(
            "final horizon must be positive".into(),
        ));
    }
    let last = grid.times.len() - 1;
    let mut growths = Vec::with_capacity(grid.paths.len());
    let mut n_state_absorbed = 0usize;
    for p in &grid.paths {
        // wealth clipped to zero is a legitimate outcome (growth -inf);
        // state absorption removes the sample and is reported
        match p.absorbed_at {
            Some(_) if p.values[last] > 0.0 => n_state_absorbed += 1,
            _ => {
                let v = p.values[last];
                growths.push(if v > 0.0 {
                    v.ln() / t
                } else {
                    f64::NEG_INFINITY
                });
            }
        }
    }
    if growths.is_empty() {
        return Err(GrowthError::AllAbsorbed);
    }
    growths.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = growths.len();
    let quantiles: Vec<(f64, f64)> = [0.05, 0.25, 0.5, 0.75, 0.95]
        .iter()
        .map(|&q| {
            let idx = ((q * n as f64) as usize).min(n - 1);
            (q, growths[idx])
        })
        .collect();
    let gammas: Vec<f64> = match gamma_grid {
        Some(g) => g.to_vec(),
        None => {
            let lo = growths[(0.01 * n as f64) as usize].max(-1e6);
            let hi = growths[n - 1];
            let span = (hi - lo).max(1e-9);
            (0..129)
                .map(|k| lo - 0.05 * span + 1.1 * span * k as f64 / 128.0)
                .collect()
        }
    };
    let mut fractions = Vec::with_capacity(gammas.len());
    let mut g_hat = f64::NEG_INFINITY;
    for &g in &gammas {
        // growths sorted ascending: count of entries >= g
        let pos = growths.partition_point(|&v| v < g);
        let frac = (n - pos) as f64 / n as f64;
        fractions.push(frac);
        if frac >= GROWTH_THRESHOLD && g > g_hat {
            g_hat = g;
        }
    }
    Ok(GrowthReport {
        horizon: t,
        n_paths: n,
        n_state_absorbed,
        gamma_grid: gammas,
        fractions,
        g_hat,
        quantiles,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub name: String,
    pub g_hat: f64,
    /// Fraction of recorded (path, time) samples over the last half of the
    /// horizon that sit inside the compact reference level.
    pub occupancy: f64,
    pub tight: bool,
    pub n_absorbed: usize,
}

/// For each candidate drift: simulate, compute the eigen-wealth growth, and
/// flag tightness (occupancy of a fixed compact exhaustion level over the
/// last half of the horizon at 0.99). The growth bound `g_hat >= lambda` is
/// only predicted for drifts with the tight flag set.
#[allow(clippy::too_many_arguments)]
pub fn robustness_sweep(
    pair: &Eigenpair,
    domain: &DomainSpec,
    cov: &dyn CovarianceField,
    x0: &[f64],
    drifts: &[(String, &dyn DriftField)],
    cfg: &SimConfig,
    compact_level: usize,
) -> Result<Vec<SweepRow>, GrowthError> {
    let mut rows = Vec::new();
    for (idx, (name, drift)) in drifts.iter().enumerate() {
        let run_cfg = SimConfig {
            seed: cfg.seed.wrapping_add(idx as u64),
            ..*cfg
        };
        let ens = simulate(&Measure::Drift(*drift), domain, cov, x0, &run_cfg)?;
        let wealth = wealth_star(pair, &ens)?;
        // a drift that kills every path still gets a row, with the flag off
        let g_hat = match growth_rate(&wealth, None) {
            Ok(rep) => rep.g_hat,
            Err(GrowthError::AllAbsorbed) => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        };
        let half = ens.horizon / 2.0;
        let mut inside = 0usize;
        let mut total = 0usize;
        for p in &ens.paths {
            for (k, &t) in ens.times.iter().enumerate() {
                if t < half {
                    continue;
                }
                if let Some(x) = p.state_at(k, ens.dim) {
                    total += 1;
                    if domain.in_level(compact_level, x) {
                        inside += 1;
                    }
                }
            }
        }
        let occupancy = if total > 0 {
            inside as f64 / total as f64
        } else {
            0.0
        };
        rows.push(SweepRow {
            name: name.clone(),
            g_hat,
            occupancy,
            tight: occupancy >= 0.99,
            n_absorbed: ens.absorbed_count(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct NumeraireReport {
    pub times: Vec<f64>,
    pub mean_ratio: Vec<f64>,
    /// Paired standard error of each consecutive mean difference.
    pub step_se: Vec<f64>,
    pub monotone_pass: bool,
}

/// Supermartingale diagnostic: the sample mean of `V_t / V*_t` under the
/// tilted measure must be non-increasing (up to 3 paired standard errors at
/// each comparison) for every admissible wealth process.
pub fn numeraire_check(
    pair: &Eigenpair,
    strategy: &dyn Strategy,
    domain: &DomainSpec,
    cov: &dyn CovarianceField,
    x0: &[f64],
    cfg: &SimConfig,
    n_compare: usize,
) -> Result<NumeraireReport, GrowthError> {
    let ens = simulate(&Measure::Star(pair), domain, cov, x0, cfg)?;
    let star = wealth_star(pair, &ens)?;
    let cand = wealth_integrate(strategy, &ens)?;
    let n_rec = ens.times.len();
    let stride = (n_rec / n_compare.max(2)).max(1);
    let compare: Vec<usize> = (0..n_rec).step_by(stride).collect();

    let n_paths = ens.n_paths();
    let mut ratios: Vec<Vec<f64>> = Vec::with_capacity(compare.len());
    for &k in &compare {
        let mut col = Vec::with_capacity(n_paths);
        for p in 0..n_paths {
            let vs = star.paths[p].values[k];
            let vc = cand.paths[p].values[k];
            col.push(vc / vs);
        }
        ratios.push(col);
    }
    let means: Vec<f64> = ratios
        .iter()
        .map(|col| col.iter().sum::<f64>() / n_paths as f64)
        .collect();
    let mut step_se = Vec::with_capacity(compare.len().saturating_sub(1));
    let mut pass = true;
    for k in 1..compare.len() {
        let diffs: Vec<f64> = (0..n_paths)
            .map(|p| ratios[k][p] - ratios[k - 1][p])
            .collect();
        let mean_d = diffs.iter().sum::<f64>() / n_paths as f64;
        let var = diffs
            .iter()
            .map(|v| (v - mean_d) * (v - mean_d))
            .sum::<f64>()
            / (n_paths as f64 - 1.0);
        let se = (var / n_paths as f64).sqrt();
        step_se.push(se);
        if mean_d > 3.0 * se {
            pass = false;
        }
    }
    Ok(NumeraireReport {
        times: compare.iter().map(|&k| ens.times[k]).collect(),
        mean_ratio: means,
        step_se,
        monotone_pass: pass,
    })
}

// ---------------------------------------------------------------------------
// Optimal arbitrage
// ---------------------------------------------------------------------------

/// Survival function of driftless Brownian motion on the half-line started
/// at `x`: `U(t, x) = 2 Phi(x / sqrt(t)) - 1`, with `U(0, x) = 1` for
/// `x > 0`.
pub fn bessel_survival(t: f64, x: f64) -> f64 {
    if t <= 0.0 {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    2.0 * normal_cdf(x / t.sqrt()) - 1.0
}

/// Where the finite-horizon arbitrage takes its survival function from.
pub enum SurvivalSource<'a> {
    /// The closed form of the driftless half-line model.
    ClosedFormBessel,
    /// A Monte-Carlo survival table (the optional slow path).
    Table(&'a SurvivalTable),
}

impl SurvivalSource<'_> {
    fn eval(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            SurvivalSource::ClosedFormBessel => bessel_survival(t, x[0]),
            SurvivalSource::Table(tab) => tab.eval(t, x[0]),
        }
    }
}

/// The finite-horizon optimal arbitrage along one path:
/// `V_t = U(T - t, X_t) / U(T, x0)`, normalized to 1 at time zero.
pub fn optimal_arbitrage_closed_form(
    times: &[f64],
    states: &[f64],
    horizon: f64,
    x0: f64,
) -> Result<WealthPath, GrowthError> {
    if times.last().is_some_and(|&t| t >= horizon) {
        return Err(GrowthError::BadInput(format!(
            "requested time {} reaches the arbitrage horizon {horizon}",
            times.last().unwrap()
        )));
    }
    let denom = bessel_survival(horizon, x0);
    let values = times
        .iter()
        .zip(states)
        .map(|(&t, &x)| bessel_survival(horizon - t, x) / denom)
        .collect();
    Ok(WealthPath {
        values,
        absorbed_at: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ArbitrageRow {
    pub horizon: f64,
    pub median_sup_dev: f64,
    pub p95_sup_dev: f64,
    /// Density-ratio statistic `E |V^T_t / V*_t - 1|` at the final time.
    pub mean_abs_z_minus_1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArbitrageReport {
    pub t: f64,
    pub rows: Vec<ArbitrageRow>,
}

/// Convergence of the finite-horizon arbitrages to the eigen-wealth: for
/// each maturity `T`, the per-path `sup_{tau <= t} |V^T_tau - V*_tau|`
/// (median and 95th percentile over paths) and the density-ratio statistic
/// at the final time. Simulated under the tilted measure.
#[allow(clippy::too_many_arguments)]
pub fn arbitrage_convergence(
    pair: &Eigenpair,
    domain: &DomainSpec,
    cov: &dyn CovarianceField,
    x0: &[f64],
    t: f64,
    horizons: &[f64],
    source: &SurvivalSource,
    cfg: &SimConfig,
) -> Result<ArbitrageReport, GrowthError> {
    if horizons.iter().any(|&h| h <= t) {
        return Err(GrowthError::BadInput(format!(
            "every arbitrage horizon must exceed the path horizon t = {t}"
        )));
    }
    let run_cfg = SimConfig {
        horizon: t,
        ..*cfg
    };
    let ens = simulate(&Measure::Star(pair), domain, cov, x0, &run_cfg)?;
    let star = wealth_star(pair, &ens)?;
    let d = ens.dim;
    let mut rows = Vec::with_capacity(horizons.len());
    for &big_t in horizons {
        let denom = source.eval(big_t, x0);
        let mut sups = Vec::with_capacity(ens.n_paths());
        let mut zdevs = Vec::with_capacity(ens.n_paths());
        let last = ens.times.len() - 1;
        for (p, path) in ens.paths.iter().enumerate() {
            let mut sup = 0.0f64;
            let mut z_final = f64::NAN;
            for (k, &tau) in ens.times.iter().enumerate() {
                let Some(x) = path.state_at(k, d) else { break };
                let v_t = source.eval(big_t - tau, x) / denom;
                let v_star = star.paths[p].values[k];
                sup = sup.max((v_t - v_star).abs());
                if k == last {
                    z_final = v_t / v_star;
                }
            }
            sups.push(sup);
            if z_final.is_finite() {
                zdevs.push((z_final - 1.0).abs());
            }
        }
        sups.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sups[sups.len() / 2];
        let p95 = sups[(0.95 * sups.len() as f64) as usize];
        let mean_z = zdevs.iter().sum::<f64>() / zdevs.len().max(1) as f64;
        rows.push(ArbitrageRow {
            horizon: big_t,
            median_sup_dev: median,
            p95_sup_dev: p95,
            mean_abs_z_minus_1: mean_z,
        });
    }
    Ok(ArbitrageReport { t, rows })
}

/// Monte-Carlo survival table `U(t, x)` on a `(t, x)` grid with bilinear
/// interpolation, for models without a closed-form survival function.
pub struct SurvivalTable {
    t_grid: Vec<f64>,
    x_grid: Vec<f64>,
    /// Row-major `t_grid.len() x x_grid.len()`.
    values: Vec<f64>,
}

impl SurvivalTable {
    pub fn build(
        domain: &DomainSpec,
        cov: &dyn CovarianceField,
        t_grid: Vec<f64>,
        x_grid: Vec<f64>,
        cfg: &SimConfig,
    ) -> Result<Self, GrowthError> {
        if domain.dim() != 1 {
            return Err(GrowthError::BadInput(
                "survival tables are one-dimensional".into(),
            ));
        }
        if !t_grid.windows(2).all(|w| w[1] > w[0]) || !x_grid.windows(2).all(|w| w[1] > w[0]) {
            return Err(GrowthError::BadInput("grids must be increasing".into()));
        }
        let t_max = *t_grid.last().unwrap();
        let mut values = vec![0.0; t_grid.len() * x_grid.len()];
        for (j, &x) in x_grid.iter().enumerate() {
            let run_cfg = SimConfig {
                horizon: t_max,
                seed: cfg.seed.wrapping_add(j as u64),
                ..*cfg
            };
            let ens = simulate(&Measure::DominatingQ, domain, cov, &[x], &run_cfg)?;
            for (i, &t) in t_grid.iter().enumerate() {
                let survivors = ens.paths.iter().filter(|p| p.exit_time > t).count();
                values[i * x_grid.len() + j] = survivors as f64 / ens.n_paths() as f64;
            }
        }
        Ok(Self {
            t_grid,
            x_grid,
            values,
        })
    }

    /// Bilinear interpolation, clamped to the grid box.
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let nx = self.x_grid.len();
        let ti = bracket(&self.t_grid, t);
        let xi = bracket(&self.x_grid, x);
        let (t0, t1) = (self.t_grid[ti], self.t_grid[ti + 1]);
        let (x0, x1) = (self.x_grid[xi], self.x_grid[xi + 1]);
        let wt = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let wx = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
        let v = |i: usize, j: usize| self.values[i * nx + j];
        (1.0 - wt) * ((1.0 - wx) * v(ti, xi) + wx * v(ti, xi + 1))
            + wt * ((1.0 - wx) * v(ti + 1, xi) + wx * v(ti + 1, xi + 1))
    }
}

fn bracket(grid: &[f64], v: f64) -> usize {
    match grid.binary_search_by(|p| p.partial_cmp(&v).unwrap()) {
        Ok(i) => i.min(grid.len() - 2),
        Err(0) => 0,
        Err(i) => (i - 1).min(grid.len() - 2),
    }
}
