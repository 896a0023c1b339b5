//! Euler-Maruyama path simulation under the dominating driftless measure,
//! under eigenfunction tilts (drift `c grad log eta`), and under arbitrary
//! Markovian drifts, with exit detection against the nested exhaustion.
//!
//! Reproducibility contract: path `i` draws from stream `i` of a
//! counter-based generator seeded by the run seed, so ensembles are
//! bit-identical for any worker count. Estimator reductions run over the
//! ordered path vector, never over a parallel reduction tree.
//!
//! Boundary handling: near the effective interior shell `E_n`
//! (`n = absorb_level`) and near the true boundary the step duration halves,
//! recursively down to `dt/2^8` on a dyadic clock, so that a single
//! committed step cannot plausibly jump across unmonitored territory: the
//! step at duration `h` is refined while the 8-sigma travel bound
//! `|b| h + 8 |sigma|_F sqrt(h)` exceeds the distance to the shell (from
//! inside `E_n`) or to the boundary of `E` (from the buffer zone between
//! `E_n` and the boundary). Every committed proposal is accepted wherever
//! it lands inside `E`; a committed step that exits `E` absorbs the path at
//! the sub-step time. Re-drawing rejected proposals would censor boundary
//! crossings and reflect paths off the shell, so nothing is ever re-drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{CovarianceField, DomainKind, DomainSpec, DriftField, Eigenpair};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("sde: {0}")]
    BadConfig(String),
    #[error("sde: x0 = {x0:?} is not inside the effective interior E_{level}")]
    StartOutsideInterior { x0: Vec<f64>, level: usize },
    #[error("sde: horizon {t} exceeds the simulated horizon {horizon}")]
    HorizonExceeded { t: f64, horizon: f64 },
    #[error("sde: tilted-measure simulation absorbed {absorbed} of {total} paths; the exit-identity hypothesis (no explosion under the tilt) fails numerically")]
    HypothesisFailure { absorbed: usize, total: usize },
    #[error("sde: all paths were absorbed before the horizon")]
    AllAbsorbed,
}

pub const MAX_DIM: usize = 8;
const REFINE_DEPTH: u32 = 8;
/// Soft cap on stored floats per ensemble; the auto record stride is chosen
/// to stay under it.
const RECORD_BUDGET: usize = 8_000_000;

/// Simulation run parameters.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Index `n` of the exhaustion level treated as the effective interior.
    pub absorb_level: usize,
    /// States are recorded every `record_stride` steps (0 selects a stride
    /// that respects the memory budget). Exit times are always exact.
    pub record_stride: usize,
}

impl SimConfig {
    pub fn new(horizon: f64, dt: f64, n_paths: usize, seed: u64, absorb_level: usize) -> Self {
        Self {
            horizon,
            dt,
            n_paths,
            seed,
            absorb_level,
            record_stride: 0,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    fn validate(&self, domain: &DomainSpec) -> Result<(usize, usize), SimError> {
        if !(self.dt > 0.0) || !(self.horizon >= self.dt) || self.n_paths < 1 {
            return Err(SimError::BadConfig(format!(
                "need dt > 0, horizon >= dt, n_paths >= 1 (got dt = {}, horizon = {}, n_paths = {})",
                self.dt, self.horizon, self.n_paths
            )));
        }
        if self.absorb_level >= domain.exhaustion_count {
            return Err(SimError::BadConfig(format!(
                "absorb_level {} out of range (domain exposes {} levels)",
                self.absorb_level, domain.exhaustion_count
            )));
        }
        let n_steps = (self.horizon / self.dt).round().max(1.0) as usize;
        let stride = if self.record_stride > 0 {
            self.record_stride
        } else {
            let per_path = (RECORD_BUDGET / self.n_paths.max(1)).max(2);
            n_steps.div_ceil(per_path).max(1)
        };
        Ok((n_steps, stride))
    }
}

/// The law driving the simulation.
pub enum Measure<'a> {
    /// Driftless dominating measure: `dX = sigma(X) dW`.
    DominatingQ,
    /// Eigenfunction tilt: drift `c(x) grad log eta(x)`.
    Star(&'a Eigenpair),
    /// Arbitrary Markovian drift, standing in for a candidate model.
    Drift(&'a dyn DriftField),
}

/// One simulated path: recorded states plus exact exit bookkeeping.
#[derive(Debug, Clone)]
pub struct PathRecord {
    /// Recorded states, `n_records x dim` row-major; NaN after absorption
    /// (the absorbed-state marker).
    pub states: Vec<f64>,
    /// First exit time from `E` (+inf when the path never left).
    pub exit_time: f64,
    /// First exit time from each exhaustion level (coarse-step resolution).
    pub level_exit_times: Vec<f64>,
    pub absorbed: bool,
    /// The path crossed the synthetic outer boundary rather than the true
    /// boundary of `E`.
    pub outer_hit: bool,
    /// Absorption was triggered by a covariance degeneracy rather than a
    /// domain exit.
    pub sigma_failure: bool,
}

impl PathRecord {
    /// State at record index `k`, or `None` after absorption.
    pub fn state_at(&self, k: usize, dim: usize) -> Option<&[f64]> {
        let s = &self.states[k * dim..(k + 1) * dim];
        if s.iter().all(|v| v.is_finite()) {
            Some(s)
        } else {
            None
        }
    }

    /// Last recorded in-domain state.
    pub fn last_alive(&self, dim: usize) -> Option<&[f64]> {
        let n = self.states.len() / dim;
        (0..n)
            .rev()
            .find_map(|k| self.state_at(k, dim))
    }
}

/// A bundle of simulated paths on a shared record grid.
#[derive(Debug)]
pub struct PathEnsemble {
    pub dim: usize,
    /// Recorded times (step 0 and every stride-th step, final step included).
    pub times: Vec<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub paths: Vec<PathRecord>,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn absorbed_count(&self) -> usize {
        self.paths.iter().filter(|p| p.absorbed).count()
    }

    /// Order- and bit-exact digest of every recorded state and exit time,
    /// for reproducibility checks.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.wrapping_mul(0x1000_0000_01b3);
        };
        for p in &self.paths {
            for &s in &p.states {
                mix(s.to_bits());
            }
            mix(p.exit_time.to_bits());
            mix(p.absorbed as u64);
        }
        h
    }

    /// Terminal states of non-absorbed paths.
    pub fn terminal_states(&self) -> Vec<&[f64]> {
        let last = self.times.len() - 1;
        self.paths
            .iter()
            .filter_map(|p| p.state_at(last, self.dim))
            .collect()
    }
}

/// Fast membership test for one exhaustion level, precomputed per run.
#[derive(Clone, Copy)]
struct LevelBounds {
    kind: LevelKind,
}

#[derive(Clone, Copy)]
enum LevelKind {
    Interval { lo: f64, hi: f64 },
    Orthant { lo: f64, hi: f64 },
    Simplex { margin: f64 },
}

impl LevelBounds {
    fn new(domain: &DomainSpec, n: usize) -> Self {
        let kind = match domain.kind {
            DomainKind::Interval { alpha, beta } => {
                let h = (beta - alpha) / f64::powi(2.0, n as i32 + 2);
                LevelKind::Interval {
                    lo: alpha + h,
                    hi: beta - h,
                }
            }
            DomainKind::Orthant { .. } => {
                if n < 2 {
                    LevelKind::Orthant { lo: 1.0, hi: 1.0 }
                } else {
                    LevelKind::Orthant {
                        lo: 1.0 / n as f64,
                        hi: n as f64,
                    }
                }
            }
            DomainKind::Simplex { assets } => LevelKind::Simplex {
                margin: 1.0 / (n as f64 + assets as f64),
            },
        };
        Self { kind }
    }

    #[inline]
    fn contains(&self, x: &[f64]) -> bool {
        match self.kind {
            LevelKind::Interval { lo, hi } => x[0] > lo && x[0] < hi,
            LevelKind::Orthant { lo, hi } => x.iter().all(|&v| v > lo && v < hi),
            LevelKind::Simplex { margin } => {
                x.iter().all(|&v| v > margin) && x.iter().sum::<f64>() < 1.0 - margin
            }
        }
    }

}

/// Smallest exhaustion level containing `x`, by closed formula.
fn min_enclosing_level(domain: &DomainSpec, x: &[f64]) -> usize {
    let count = domain.exhaustion_count;
    match domain.kind {
        DomainKind::Interval { alpha, beta } => {
            let w = beta - alpha;
            let dist = (x[0] - alpha).min(beta - x[0]);
            if dist <= 0.0 {
                return count;
            }
            let n = (w / dist).log2() - 2.0;
            let m = if n < 0.0 { 0 } else { n.floor() as usize + 1 };
            // formula can be off by one at dyadic boundaries
            let mut m = m.min(count);
            while m > 0 && domain.in_level(m - 1, x) {
                m -= 1;
            }
            while m < count && !domain.in_level(m, x) {
                m += 1;
            }
            m
        }
        _ => (0..count)
            .find(|&n| domain.in_level(n, x))
            .unwrap_or(count),
    }
}

struct StepCtx<'a> {
    domain: &'a DomainSpec,
    cov: &'a dyn CovarianceField,
    measure: &'a Measure<'a>,
    dim: usize,
    cbuf: [f64; MAX_DIM * MAX_DIM],
    sbuf: [f64; MAX_DIM * MAX_DIM],
    gbuf: [f64; MAX_DIM],
    bbuf: [f64; MAX_DIM],
    absorb: LevelBounds,
}

enum StepOutcome {
    Alive([f64; MAX_DIM]),
    Absorbed {
        /// Fraction of the coarse step elapsed at the crossing.
        frac: f64,
        outer: bool,
        sigma_failure: bool,
    },
}

/// Number of leaf units (`dt/2^REFINE_DEPTH`) in one coarse step.
const LEAF_UNITS: u32 = 1 << REFINE_DEPTH;

/// Travel-bound multiplier: a committed step is considered resolved when an
/// 8-sigma move cannot cross the protective margin.
const TRAVEL_SIGMAS: f64 = 8.0;

impl<'a> StepCtx<'a> {
    /// Whether a step of duration `h` from `x` is safely resolved against
    /// the protective geometry: the shell of the effective interior when
    /// inside it, the true boundary (and outer radius) when in the buffer.
    /// Comparisons run per coordinate so that one large, volatile coordinate
    /// does not force refinement on margins it cannot violate.
    fn step_resolved(&self, x: &[f64], h: f64, row: &[f64], inside: bool) -> bool {
        let d = self.dim;
        let sqrt_h = h.sqrt();
        let travel = |i: usize| self.bbuf[i].abs() * h + TRAVEL_SIGMAS * row[i] * sqrt_h;
        if inside {
            match self.absorb.kind {
                LevelKind::Interval { lo, hi } => {
                    travel(0) <= (x[0] - lo).min(hi - x[0])
                }
                LevelKind::Orthant { lo, hi } => (0..d)
                    .all(|i| travel(i) <= (x[i] - lo).min(hi - x[i])),
                LevelKind::Simplex { margin } => {
                    let sum_travel: f64 = (0..d).map(travel).sum();
                    let slack = 1.0 - margin - x.iter().sum::<f64>();
                    (0..d).all(|i| travel(i) <= x[i] - margin) && sum_travel <= slack
                }
            }
        } else {
            match self.domain.kind {
                DomainKind::Interval { alpha, beta } => {
                    travel(0) <= (x[0] - alpha).min(beta - x[0])
                }
                DomainKind::Orthant { .. } => (0..d).all(|i| {
                    travel(i) <= x[i].min(self.domain.outer_radius - x[i])
                }),
                DomainKind::Simplex { .. } => {
                    let sum_travel: f64 = (0..d).map(travel).sum();
                    let slack = 1.0 - x.iter().sum::<f64>();
                    (0..d).all(|i| travel(i) <= x[i]) && sum_travel <= slack
                }
            }
        }
    }
    fn drift(&mut self, x: &[f64]) {
        let d = self.dim;
        match self.measure {
            Measure::DominatingQ => self.bbuf[..d].fill(0.0),
            Measure::Star(pair) => {
                self.cov.eval_into(x, &mut self.cbuf[..d * d]);
                pair.grad_log_eta_into(x, &mut self.gbuf[..d]);
                for i in 0..d {
                    let mut acc = 0.0;
                    for j in 0..d {
                        acc += self.cbuf[i * d + j] * self.gbuf[j];
                    }
                    self.bbuf[i] = acc;
                }
            }
            Measure::Drift(f) => f.eval_into(x, &mut self.bbuf[..d]),
        }
    }

    /// Advance the path by exactly one coarse step `dt` on a dyadic clock.
    ///
    /// Each committed sub-step uses the coarsest dyadic duration that both
    /// fits the remaining time and keeps the 8-sigma travel bound below the
    /// protective distance (to the shell of `E_n` from inside, to the true
    /// boundary from the buffer zone). The proposal is committed wherever it
    /// lands; landing outside `E` absorbs the path.
    fn advance_coarse(
        &mut self,
        mut x: [f64; MAX_DIM],
        dt: f64,
        rng: &mut ChaCha8Rng,
    ) -> StepOutcome {
        let d = self.dim;
        let mut consumed: u32 = 0;
        while consumed < LEAF_UNITS {
            let remaining = LEAF_UNITS - consumed;
            // coarsest dyadic depth whose step fits the remaining time
            let k_fit = REFINE_DEPTH - (31 - remaining.leading_zeros()).min(REFINE_DEPTH);

            self.drift(&x[..d]);
            if self
                .cov
                .factor_into(&x[..d], &mut self.sbuf[..d * d])
                .is_err()
            {
                return StepOutcome::Absorbed {
                    frac: consumed as f64 / LEAF_UNITS as f64,
                    outer: false,
                    sigma_failure: true,
                };
            }
            // per-coordinate diffusion scales (row norms of the factor)
            let mut row = [0.0f64; MAX_DIM];
            for i in 0..d {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += self.sbuf[i * d + j] * self.sbuf[i * d + j];
                }
                row[i] = acc.sqrt();
            }
            let inside = self.absorb.contains(&x[..d]);

            let mut k = k_fit;
            while k < REFINE_DEPTH {
                let h = dt * (1u32 << (REFINE_DEPTH - k)) as f64 / LEAF_UNITS as f64;
                if self.step_resolved(&x[..d], h, &row, inside) {
                    break;
                }
                k += 1;
            }
            let units = 1u32 << (REFINE_DEPTH - k);
            let h = dt * units as f64 / LEAF_UNITS as f64;
            let sqrt_h = h.sqrt();
            let mut prop = [0.0f64; MAX_DIM];
            for i in 0..d {
                prop[i] = x[i] + self.bbuf[i] * h;
            }
            for j in 0..d {
                let z: f64 = StandardNormal.sample(rng);
                let zs = z * sqrt_h;
                for i in 0..d {
                    prop[i] += self.sbuf[i * d + j] * zs;
                }
            }
            consumed += units;
            if self.absorb.contains(&prop[..d]) {
                x = prop;
                continue;
            }
            if self.domain.outer_hit(&prop[..d]) {
                return StepOutcome::Absorbed {
                    frac: consumed as f64 / LEAF_UNITS as f64,
                    outer: true,
                    sigma_failure: false,
                };
            }
            if self.domain.contains(&prop[..d]) {
                x = prop;
                continue;
            }
            return StepOutcome::Absorbed {
                frac: consumed as f64 / LEAF_UNITS as f64,
                outer: false,
                sigma_failure: false,
            };
        }
        StepOutcome::Alive(x)
    }
}

/// Simulate `cfg.n_paths` Euler-Maruyama paths of `dX = b dt + sigma(X) dW`
/// from `x0`, with `b` chosen by `measure`.
pub fn simulate(
    measure: &Measure,
    domain: &DomainSpec,
    cov: &dyn CovarianceField,
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<PathEnsemble, SimError> {
    let d = domain.dim();
    if d > MAX_DIM {
        return Err(SimError::BadConfig(format!(
            "dimension {d} exceeds the supported maximum {MAX_DIM}"
        )));
    }
    if x0.len() != d || cov.dim() != d {
        return Err(SimError::BadConfig(format!(
            "dimension mismatch: domain {d}, x0 {}, covariance {}",
            x0.len(),
            cov.dim()
        )));
    }
    let (n_steps, stride) = cfg.validate(domain)?;
    let absorb = LevelBounds::new(domain, cfg.absorb_level);
    if !absorb.contains(x0) {
        return Err(SimError::StartOutsideInterior {
            x0: x0.to_vec(),
            level: cfg.absorb_level,
        });
    }

    // record grid: step 0, every stride-th step, and the final step
    let mut record_steps: Vec<usize> = (0..=n_steps).step_by(stride).collect();
    if *record_steps.last().unwrap() != n_steps {
        record_steps.push(n_steps);
    }
    let times: Vec<f64> = record_steps.iter().map(|&k| k as f64 * cfg.dt).collect();
    let n_records = record_steps.len();
    let level_count = domain.exhaustion_count;

    let mut x0_arr = [0.0f64; MAX_DIM];
    x0_arr[..d].copy_from_slice(x0);

    let paths: Vec<PathRecord> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path_idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(path_idx as u64 + 1);
            let mut ctx = StepCtx {
                domain,
                cov,
                measure,
                dim: d,
                cbuf: [0.0; MAX_DIM * MAX_DIM],
                sbuf: [0.0; MAX_DIM * MAX_DIM],
                gbuf: [0.0; MAX_DIM],
                bbuf: [0.0; MAX_DIM],
                absorb,
            };
            let mut states = vec![f64::NAN; n_records * d];
            let mut level_exits = vec![f64::INFINITY; level_count];
            let mut x = x0_arr;
            states[..d].copy_from_slice(&x[..d]);
            let mut next_record = 1usize;
            let mut level_cursor = min_enclosing_level(domain, &x[..d]);
            for lvl in level_exits.iter_mut().take(level_cursor) {
                *lvl = 0.0;
            }
            let mut exit_time = f64::INFINITY;
            let mut absorbed = false;
            let mut outer_hit = false;
            let mut sigma_failure = false;

            for k in 0..n_steps {
                match ctx.advance_coarse(x, cfg.dt, &mut rng) {
                    StepOutcome::Alive(next) => {
                        x = next;
                        let t = (k + 1) as f64 * cfg.dt;
                        let m = min_enclosing_level(domain, &x[..d]);
                        if m > level_cursor {
                            for lvl in level_exits.iter_mut().take(m).skip(level_cursor) {
                                *lvl = t;
                            }
                            level_cursor = m;
                        }
                        if next_record < n_records && record_steps[next_record] == k + 1 {
                            states[next_record * d..(next_record + 1) * d]
                                .copy_from_slice(&x[..d]);
                            next_record += 1;
                        }
                    }
                    StepOutcome::Absorbed {
                        frac,
                        outer,
                        sigma_failure: sf,
                    } => {
                        exit_time = (k as f64 + frac) * cfg.dt;
                        absorbed = true;
                        outer_hit = outer;
                        sigma_failure = sf;
                        for lvl in level_exits.iter_mut().skip(level_cursor) {
                            *lvl = exit_time;
                        }
                        break;
                    }
                }
            }
            PathRecord {
                states,
                exit_time,
                level_exit_times: level_exits,
                absorbed,
                outer_hit,
                sigma_failure,
            }
        })
        .collect();

    Ok(PathEnsemble {
        dim: d,
        times,
        dt: cfg.dt,
        horizon: n_steps as f64 * cfg.dt,
        seed: cfg.seed,
        paths,
    })
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

/// Fraction of paths with exit time beyond `t`, with binomial standard error.
pub fn exit_probability(ens: &PathEnsemble, t: f64) -> Result<(f64, f64), SimError> {
    if t > ens.horizon * (1.0 + 1e-12) {
        return Err(SimError::HorizonExceeded {
            t,
            horizon: ens.horizon,
        });
    }
    let n = ens.n_paths() as f64;
    let survivors = ens.paths.iter().filter(|p| p.exit_time > t).count() as f64;
    let p = survivors / n;
    let se = (p * (1.0 - p) / n).sqrt();
    Ok((p, se))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitIdentity {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub combined_se: f64,
    pub pass: bool,
}

/// Check the exit-probability representation: the survival probability of
/// the driftless process up to `t` equals `eta(x0) E[1 / V_t]` under the
/// tilted measure, where `V_t = exp(lambda t) eta(X_t)`. Both sides are
/// Monte-Carlo estimates from separately seeded ensembles; the check passes
/// when they agree within `3` combined standard errors.
pub fn exit_identity_check(
    domain: &DomainSpec,
    cov: &dyn CovarianceField,
    pair: &Eigenpair,
    x0: &[f64],
    t: f64,
    cfg: &SimConfig,
) -> Result<ExitIdentity, SimError> {
    let q_cfg = SimConfig {
        horizon: t,
        ..*cfg
    };
    let q_ens = simulate(&Measure::DominatingQ, domain, cov, x0, &q_cfg)?;
    let (lhs, lhs_se) = exit_probability(&q_ens, t)?;
    drop(q_ens);

    let star_cfg = SimConfig {
        horizon: t,
        seed: cfg.seed.wrapping_add(1),
        ..*cfg
    };
    let star_ens = simulate(&Measure::Star(pair), domain, cov, x0, &star_cfg)?;
    let absorbed = star_ens.absorbed_count();
    if absorbed > 0 {
        return Err(SimError::HypothesisFailure {
            absorbed,
            total: star_ens.n_paths(),
        });
    }
    let eta_x0 = pair.eta(x0);
    let discount = (-pair.lambda * t).exp();
    let samples: Vec<f64> = star_ens
        .terminal_states()
        .iter()
        .map(|x| eta_x0 * discount / pair.eta(x))
        .collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let rhs_se = (var / n).sqrt();
    let combined_se = (lhs_se * lhs_se + rhs_se * rhs_se).sqrt();
    Ok(ExitIdentity {
        lhs,
        lhs_se,
        rhs: mean,
        rhs_se,
        combined_se,
        pass: (lhs - mean).abs() <= 3.0 * combined_se,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TailPoint {
    pub t: f64,
    pub survivors: usize,
    pub scaled: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailDecay {
    pub points: Vec<TailPoint>,
    /// max/min of the scaled tail over the larger half of the horizons.
    pub flatness: f64,
    /// Horizons dropped because fewer than 100 paths survived.
    pub truncated: Vec<f64>,
}

/// Scaled tail sequence `exp(lambda t) Q[exit > t]` over increasing horizons.
/// Flatness of the sequence over the later horizons is the numerical witness
/// of the tail-equivalence constant.
pub fn tail_decay_estimate(
    domain: &DomainSpec,
    cov: &dyn CovarianceField,
    lambda: f64,
    x0: &[f64],
    t_list: &[f64],
    cfg: &SimConfig,
) -> Result<TailDecay, SimError> {
    if t_list.is_empty() || !t_list.windows(2).all(|w| w[1] > w[0]) {
        return Err(SimError::BadConfig(
            "t_list must be non-empty and increasing".into(),
        ));
    }
    let t_max = *t_list.last().unwrap();
    let run_cfg = SimConfig {
        horizon: t_max,
        ..*cfg
    };
    let ens = simulate(&Measure::DominatingQ, domain, cov, x0, &run_cfg)?;
    let mut points = Vec::new();
    let mut truncated = Vec::new();
    for &t in t_list {
        let survivors = ens.paths.iter().filter(|p| p.exit_time > t).count();
        if survivors < 100 {
            truncated.push(t);
            continue;
        }
        let (p, se) = exit_probability(&ens, t)?;
        let scale = (lambda * t).exp();
        points.push(TailPoint {
            t,
            survivors,
            scaled: scale * p,
            se: scale * se,
        });
    }
    let half = points.len() / 2;
    let tail = &points[half..];
    let flatness = if tail.len() >= 2 {
        let max = tail.iter().map(|p| p.scaled).fold(f64::MIN, f64::max);
        let min = tail.iter().map(|p| p.scaled).fold(f64::MAX, f64::min);
        max / min
    } else {
        f64::NAN
    };
    Ok(TailDecay {
        points,
        flatness,
        truncated,
    })
}
