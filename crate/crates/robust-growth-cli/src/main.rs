//! Batch front-end: scenario configuration, example-registry dispatch,
//! reproducible runs, and report emission.
//!
//! Every run writes a JSON report (inputs echoed, version, wall clock,
//! results) into the output directory and prints it to stdout; curve-style
//! results additionally get plot-ready CSV sidecars. Exit status: 0 on
//! pass, 2 when a test gate fails, 1 on error.

mod config;
mod expr;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use robust_growth::eigen1d::{
    classify, solve_principal_eigenpair, LambdaSign, ShootConfig,
};
use robust_growth::growth::{
    arbitrage_convergence, growth_rate, numeraire_check, robustness_sweep, wealth_star,
    ConstantProportion, GradLogStrategy, Strategy, SurvivalSource, SurvivalTable, ZeroStrategy,
};
use robust_growth::model::{Cov1d, CovarianceField, DomainSpec, Drift1d, DriftField, Eigenpair};
use robust_growth::registry;
use robust_growth::report::{
    write_arbitrage_csv, write_ensemble_csv, write_growth_csv, write_numeraire_csv,
    EigenReportBody,
};
use robust_growth::sde::{exit_probability, simulate, Measure, SimConfig};

#[derive(Parser)]
#[command(
    name = "robust-growth",
    version,
    about = "Principal eigenpairs of elliptic operators, growth-optimal wealth processes, and their Monte-Carlo diagnostics"
)]
struct Cli {
    /// Configuration file (TOML sections of lowercase snake_case keys);
    /// command-line flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed (default 0; every run is reproducible).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (falls back to ROBUST_GROWTH_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory for reports and CSV sidecars.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the built-in example models.
    ListExamples,
    /// Run a registry entry through its residual verification.
    VerifyExample { name: String },
    /// Solve the principal eigenpair of a one-dimensional model.
    Eigen(EigenArgs),
    /// Run the pointwise/integral/explosion/recurrence classification.
    Classify(ModelArgs),
    /// Simulate paths under a chosen measure.
    Simulate(SimulateArgs),
    /// Estimate the growth rate of the eigen-wealth process.
    Growth(GrowthArgs),
    /// Check the supermartingale (numeraire) property of a candidate wealth.
    Numeraire(NumeraireArgs),
    /// Finite-horizon optimal-arbitrage convergence diagnostics.
    Arbitrage(ArbitrageArgs),
    /// Growth of the eigen-wealth under a list of candidate drifts.
    RobustnessSweep(SweepArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Registry example name (see list-examples).
    #[arg(long)]
    example: Option<String>,
    /// Inline covariance expression in x (one-dimensional).
    #[arg(long = "c", allow_hyphen_values = true)]
    covariance: Option<String>,
    /// Interval endpoints for an inline covariance.
    #[arg(long, num_args = 2, value_names = ["ALPHA", "BETA"])]
    interval: Option<Vec<f64>>,
    /// Declared endpoint orders "p_alpha,p_beta" for an inline covariance.
    #[arg(long)]
    orders: Option<String>,
}

#[derive(Args)]
struct EigenArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated strictly decreasing truncation offsets.
    #[arg(long)]
    epsilons: Option<String>,
    /// Eigenvalue bisection tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Normalization anchor (default: interval midpoint).
    #[arg(long)]
    x0: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Measure: "q", "star", or "drift:<expr>".
    #[arg(long, default_value = "q")]
    measure: String,
    /// Start point (comma-separated coordinates).
    #[arg(long)]
    x0: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    absorb_level: Option<usize>,
    #[arg(long)]
    record_stride: Option<usize>,
    /// Also write the ensemble states as CSV.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct GrowthArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Measure driving the paths: "star" (default), "q", or "drift:<expr>".
    #[arg(long, default_value = "star")]
    measure: String,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    absorb_level: Option<usize>,
}

#[derive(Args)]
struct NumeraireArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Candidate wealth: "zero", "star", or "prop:<fraction>".
    #[arg(long, default_value = "zero")]
    candidate: String,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    absorb_level: Option<usize>,
}

#[derive(Args)]
struct ArbitrageArgs {
    /// Registry example; the closed-form survival function requires
    /// bessel-4.3, other one-dimensional entries use a Monte-Carlo table.
    #[arg(long, default_value = "bessel-4.3")]
    example: String,
    /// Path horizon t.
    #[arg(long)]
    t: Option<f64>,
    /// Comma-separated arbitrage maturities (all > t).
    #[arg(long)]
    horizons: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Candidate drift expression in x (repeatable).
    #[arg(long = "drift", allow_hyphen_values = true)]
    drifts: Vec<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    absorb_level: Option<usize>,
    /// Exhaustion level used as the compact reference set.
    #[arg(long)]
    compact_level: Option<usize>,
}

/// Gate outcome of a run: process exit 0 or 2.
enum Gate {
    Pass,
    Fail(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Gate::Pass) => ExitCode::SUCCESS,
        Ok(Gate::Fail(reason)) => {
            eprintln!("gate failed: {reason}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

struct Ctx {
    file: config::FileConfig,
    seed: u64,
    out_dir: PathBuf,
    started: Instant,
}

impl Ctx {
    /// Write the JSON report (and echo it to stdout). The wall-clock field
    /// is the only part of the report that varies between identical runs.
    fn emit<T: Serialize>(
        &self,
        command: &str,
        inputs: serde_json::Value,
        results: &T,
    ) -> anyhow::Result<()> {
        let report = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "inputs": inputs,
            "results": results,
            "wall_clock_ms": self.started.elapsed().as_millis() as u64,
        });
        let text = serde_json::to_string_pretty(&report)?;
        fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(format!("{command}.json"));
        fs::write(&path, format!("{text}\n"))?;
        println!("{text}");
        Ok(())
    }

    fn sidecar(&self, name: &str) -> anyhow::Result<fs::File> {
        fs::create_dir_all(&self.out_dir)?;
        Ok(fs::File::create(self.out_dir.join(name))?)
    }
}

fn run(cli: Cli) -> anyhow::Result<Gate> {
    let file = match &cli.config {
        Some(path) => config::load(path)?,
        None => config::FileConfig::default(),
    };
    let threads = cli
        .threads
        .or(file.run.threads)
        .or_else(|| {
            std::env::var("ROBUST_GROWTH_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        });
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cli: failed to configure the worker pool")?;
    }
    let seed = cli.seed.or(file.run.seed).unwrap_or(0);
    let out_dir = cli
        .out
        .or_else(|| file.run.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = Ctx {
        file,
        seed,
        out_dir,
        started: Instant::now(),
    };
    match cli.cmd {
        Cmd::ListExamples => cmd_list(&ctx),
        Cmd::VerifyExample { name } => cmd_verify(&ctx, &name),
        Cmd::Eigen(args) => cmd_eigen(&ctx, args),
        Cmd::Classify(args) => cmd_classify(&ctx, args),
        Cmd::Simulate(args) => cmd_simulate(&ctx, args),
        Cmd::Growth(args) => cmd_growth(&ctx, args),
        Cmd::Numeraire(args) => cmd_numeraire(&ctx, args),
        Cmd::Arbitrage(args) => cmd_arbitrage(&ctx, args),
        Cmd::RobustnessSweep(args) => cmd_sweep(&ctx, args),
    }
}

// ---------------------------------------------------------------------------
// Model resolution
// ---------------------------------------------------------------------------

/// A resolved model: either a registry entry or an inline 1-D covariance.
struct Model {
    name: String,
    domain: DomainSpec,
    covariance: Arc<dyn CovarianceField>,
    /// Exact pair for registry entries; inline models solve on demand.
    pair: Option<Eigenpair>,
    x0: Vec<f64>,
    epsilons: Option<Vec<f64>>,
    default_dt: f64,
    default_absorb_level: usize,
}

fn resolve_model(ctx: &Ctx, args: &ModelArgs) -> anyhow::Result<Model> {
    let example = args
        .example
        .clone()
        .or_else(|| ctx.file.model.example.clone());
    if let Some(name) = example {
        let ex = registry::find(&name).ok_or_else(|| {
            anyhow!(
                "cli: unknown registry name '{name}'; known names: {}",
                registry::names().join(", ")
            )
        })?;
        return Ok(Model {
            name: ex.name.to_string(),
            domain: ex.domain,
            covariance: ex.covariance,
            pair: Some(ex.pair),
            x0: ex.x0,
            epsilons: ex.epsilons,
            default_dt: ex.default_dt,
            default_absorb_level: ex.default_absorb_level,
        });
    }
    let text = args
        .covariance
        .clone()
        .or_else(|| ctx.file.model.covariance.clone())
        .ok_or_else(|| {
            anyhow!("cli: a model requires either --example or --c with --interval (model module precondition)")
        })?;
    let (alpha, beta) = match (&args.interval, ctx.file.model.alpha, ctx.file.model.beta) {
        (Some(v), _, _) if v.len() == 2 => (v[0], v[1]),
        (None, Some(a), Some(b)) => (a, b),
        _ => bail!("cli: inline covariance requires --interval ALPHA BETA (model module precondition)"),
    };
    if !(alpha < beta) || !alpha.is_finite() || !beta.is_finite() {
        bail!("cli: interval requires finite alpha < beta, got ({alpha}, {beta}) (model module precondition)");
    }
    let parsed = expr::parse(&text)?;
    let orders = match (&args.orders, ctx.file.model.orders) {
        (Some(s), _) => {
            let parts: Vec<f64> = s
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .context("cli: --orders expects 'p_alpha,p_beta'")?;
            if parts.len() != 2 {
                bail!("cli: --orders expects exactly two values");
            }
            Some((parts[0], parts[1]))
        }
        (None, Some([a, b])) => Some((a, b)),
        _ => None,
    };
    let cov: Arc<dyn CovarianceField> = match orders {
        Some((pa, pb)) => Arc::new(Cov1d::with_orders(move |x| parsed.eval(x), pa, pb)),
        None => Arc::new(Cov1d::new(move |x| parsed.eval(x))),
    };
    let domain = DomainSpec::interval(alpha, beta)?;
    let mid = 0.5 * (alpha + beta);
    Ok(Model {
        name: format!("inline:{text}"),
        domain,
        covariance: cov,
        pair: None,
        x0: ctx.file.model.x0.clone().unwrap_or_else(|| vec![mid]),
        epsilons: None,
        default_dt: 5e-4,
        default_absorb_level: 4,
    })
}

/// Epsilon ladder adapted to the endpoint degeneracy: order-2 endpoints
/// converge in 1/log^2(1/eps) and need a much deeper schedule.
fn default_epsilons(model: &Model) -> Vec<f64> {
    if let Some(eps) = &model.epsilons {
        return eps.clone();
    }
    let (alpha, beta) = interval_of(&model.domain);
    let orders = model
        .covariance
        .endpoint_orders()
        .unwrap_or_else(|| robust_growth::model::estimate_endpoint_orders(
            model.covariance.as_ref(),
            alpha,
            beta,
        ));
    if orders.0.max(orders.1) >= 1.9 {
        vec![1e-6, 1e-8, 1e-10]
    } else {
        vec![1e-3, 1e-4, 1e-5]
    }
}

fn interval_of(domain: &DomainSpec) -> (f64, f64) {
    match domain.kind {
        robust_growth::model::DomainKind::Interval { alpha, beta } => (alpha, beta),
        _ => (0.0, 1.0),
    }
}

fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .with_context(|| format!("cli: cannot parse '{p}' as a number"))
        })
        .collect()
}

fn sim_config(
    ctx: &Ctx,
    model: &Model,
    t: Option<f64>,
    dt: Option<f64>,
    paths: Option<usize>,
    absorb: Option<usize>,
    stride: Option<usize>,
    default_t: f64,
    default_paths: usize,
) -> SimConfig {
    let sim = &ctx.file.sim;
    SimConfig {
        horizon: t.or(sim.t).unwrap_or(default_t),
        dt: dt.or(sim.dt).unwrap_or(model.default_dt),
        n_paths: paths.or(sim.paths).unwrap_or(default_paths),
        seed: ctx.seed,
        absorb_level: absorb
            .or(sim.absorb_level)
            .unwrap_or(model.default_absorb_level),
        record_stride: stride.or(sim.record_stride).unwrap_or(0),
    }
}

fn resolve_measure<'a>(
    spec: &str,
    pair: Option<&'a Eigenpair>,
    drift_holder: &'a mut Option<Drift1d<Box<dyn Fn(f64) -> f64 + Send + Sync>>>,
) -> anyhow::Result<Measure<'a>> {
    if spec == "q" {
        return Ok(Measure::DominatingQ);
    }
    if spec == "star" {
        let p = pair.ok_or_else(|| {
            anyhow!("cli: measure 'star' needs an eigenpair (registry example or a solved model)")
        })?;
        return Ok(Measure::Star(p));
    }
    if let Some(text) = spec.strip_prefix("drift:") {
        let parsed = expr::parse(text)?;
        *drift_holder = Some(Drift1d(Box::new(move |x| parsed.eval(x))));
        return Ok(Measure::Drift(drift_holder.as_ref().unwrap()));
    }
    bail!("cli: unknown measure '{spec}' (expected q, star, or drift:<expr>)")
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_list(ctx: &Ctx) -> anyhow::Result<Gate> {
    #[derive(Serialize)]
    struct Entry {
        name: &'static str,
        description: &'static str,
        lambda: f64,
    }
    let entries: Vec<Entry> = registry::all_examples()
        .iter()
        .map(|e| Entry {
            name: e.name,
            description: e.description,
            lambda: e.pair.lambda,
        })
        .collect();
    for e in &entries {
        println!("{:<14} lambda = {:<10} {}", e.name, format!("{:.6}", e.lambda), e.description);
    }
    ctx.emit("list-examples", json!({}), &entries)?;
    Ok(Gate::Pass)
}

fn cmd_verify(ctx: &Ctx, name: &str) -> anyhow::Result<Gate> {
    let ex = registry::find(name).ok_or_else(|| {
        anyhow!(
            "cli: unknown registry name '{name}'; known names: {}",
            registry::names().join(", ")
        )
    })?;
    let outcome = registry::verify_example(&ex)?;
    ctx.emit("verify-example", json!({ "name": name }), &outcome)?;
    if outcome.pass {
        Ok(Gate::Pass)
    } else {
        Ok(Gate::Fail(format!(
            "residual {} >= threshold {}",
            outcome.residual_max, outcome.threshold
        )))
    }
}

fn cmd_eigen(ctx: &Ctx, args: EigenArgs) -> anyhow::Result<Gate> {
    let model = resolve_model(ctx, &args.model)?;
    if model.domain.dim() != 1 {
        bail!("cli: eigen solves one-dimensional models only (eigen1d module precondition)");
    }
    let (alpha, beta) = interval_of(&model.domain);
    if !(alpha.is_finite() && beta.is_finite()) {
        bail!("cli: eigen requires a bounded interval (eigen1d module precondition; half-line examples have closed forms, see verify-example)");
    }
    let epsilons = match &args.epsilons {
        Some(s) => parse_list(s)?,
        None => ctx
            .file
            .eigen
            .epsilons
            .clone()
            .unwrap_or_else(|| default_epsilons(&model)),
    };
    let cfg = ShootConfig {
        lambda_tol: args.tol.or(ctx.file.eigen.tol).unwrap_or(1e-9),
        ..Default::default()
    };
    let x0 = args.x0.or(ctx.file.eigen.x0);
    let sol = solve_principal_eigenpair(
        model.covariance.as_ref(),
        (alpha, beta),
        &epsilons,
        &cfg,
        x0,
    )?;
    let classification = classify(
        model.covariance.as_ref(),
        (alpha, beta),
        Some(&sol.pair),
    )?;
    let body = EigenReportBody {
        lambda: sol.pair.lambda,
        residual_max: sol.residual_max,
        epsilons: epsilons.clone(),
        per_epsilon_lambdas: sol.per_epsilon.iter().map(|&(_, l)| l).collect(),
        extrapolation_model: sol.model,
        endpoint_orders: sol.endpoint_orders,
        classification,
    };
    ctx.emit(
        "eigen",
        json!({
            "model": model.name,
            "interval": [alpha, beta],
            "epsilons": epsilons,
            "tol": cfg.lambda_tol,
        }),
        &body,
    )?;
    if body.residual_max < 1e-5 {
        Ok(Gate::Pass)
    } else {
        Ok(Gate::Fail(format!(
            "eigenfunction residual {} >= 1e-5",
            body.residual_max
        )))
    }
}

fn cmd_classify(ctx: &Ctx, args: ModelArgs) -> anyhow::Result<Gate> {
    let model = resolve_model(ctx, &args)?;
    if model.domain.dim() != 1 {
        bail!("cli: classify handles one-dimensional models only (eigen1d module precondition)");
    }
    let (alpha, beta) = interval_of(&model.domain);
    // recurrence classification needs an eigenpair: exact for registry
    // entries, solved for inline models when the tests indicate lambda > 0
    let pair = match &model.pair {
        Some(p) => Some(p.clone()),
        None => {
            let probe = classify(model.covariance.as_ref(), (alpha, beta), None)?;
            if probe.lambda_sign == LambdaSign::Positive {
                let eps = default_epsilons(&model);
                solve_principal_eigenpair(
                    model.covariance.as_ref(),
                    (alpha, beta),
                    &eps,
                    &ShootConfig::default(),
                    None,
                )
                .ok()
                .map(|s| s.pair)
            } else {
                None
            }
        }
    };
    let report = classify(model.covariance.as_ref(), (alpha, beta), pair.as_ref())?;
    ctx.emit(
        "classify",
        json!({ "model": model.name, "interval": [alpha, beta] }),
        &report,
    )?;
    Ok(Gate::Pass)
}

fn cmd_simulate(ctx: &Ctx, args: SimulateArgs) -> anyhow::Result<Gate> {
    let model = resolve_model(ctx, &args.model)?;
    let x0 = match &args.x0 {
        Some(s) => parse_list(s)?,
        None => model.x0.clone(),
    };
    let cfg = sim_config(
        ctx,
        &model,
        args.t,
        args.dt,
        args.paths,
        args.absorb_level,
        args.record_stride,
        1.0,
        10_000,
    );
    let mut drift_holder = None;
    let measure = resolve_measure(&args.measure, model.pair.as_ref(), &mut drift_holder)?;
    let ens = simulate(&measure, &model.domain, model.covariance.as_ref(), &x0, &cfg)?;
    let (survival, se) = exit_probability(&ens, ens.horizon)?;
    let outer_hits = ens.paths.iter().filter(|p| p.outer_hit).count();
    let results = json!({
        "n_paths": ens.n_paths(),
        "absorbed": ens.absorbed_count(),
        "outer_hits": outer_hits,
        "survival_at_horizon": survival,
        "survival_se": se,
        "digest": format!("{:016x}", ens.digest()),
        "measure_note": if matches!(measure, Measure::Drift(_)) {
            "assumed-in-Pi-star: membership of a drift model in the stable class is not decidable numerically"
        } else { "" },
    });
    if args.csv {
        let mut f = ctx.sidecar("simulate_states.csv")?;
        write_ensemble_csv(&mut f, &ens)?;
    }
    ctx.emit(
        "simulate",
        json!({
            "model": model.name,
            "measure": args.measure,
            "x0": x0,
            "config": cfg,
        }),
        &results,
    )?;
    Ok(Gate::Pass)
}

fn cmd_growth(ctx: &Ctx, args: GrowthArgs) -> anyhow::Result<Gate> {
    let model = resolve_model(ctx, &args.model)?;
    let pair = model
        .pair
        .clone()
        .ok_or_else(|| anyhow!("cli: growth needs a registry example with an eigenpair"))?;
    let cfg = sim_config(
        ctx,
        &model,
        args.t,
        args.dt,
        args.paths,
        args.absorb_level,
        None,
        200.0,
        1000,
    );
    let mut drift_holder = None;
    let measure = resolve_measure(&args.measure, Some(&pair), &mut drift_holder)?;
    let ens = simulate(&measure, &model.domain, model.covariance.as_ref(), &model.x0, &cfg)?;
    let wealth = wealth_star(&pair, &ens)?;
    let report = growth_rate(&wealth, None)?;
    let mut f = ctx.sidecar("growth_curve.csv")?;
    write_growth_csv(&mut f, &report)?;
    ctx.emit(
        "growth",
        json!({
            "model": model.name,
            "measure": args.measure,
            "lambda": pair.lambda,
            "config": cfg,
        }),
        &report,
    )?;
    Ok(Gate::Pass)
}

fn cmd_numeraire(ctx: &Ctx, args: NumeraireArgs) -> anyhow::Result<Gate> {
    let model = resolve_model(ctx, &args.model)?;
    let pair = model
        .pair
        .clone()
        .ok_or_else(|| anyhow!("cli: numeraire needs a registry example with an eigenpair"))?;
    let candidate = args
        .candidate
        .clone();
    let candidate = if candidate.is_empty() {
        ctx.file
            .numeraire
            .candidate
            .clone()
            .unwrap_or_else(|| "zero".into())
    } else {
        candidate
    };
    let strategy: Box<dyn Strategy> = if candidate == "zero" {
        Box::new(ZeroStrategy)
    } else if candidate == "star" {
        Box::new(GradLogStrategy(&pair))
    } else if let Some(frac) = candidate.strip_prefix("prop:") {
        let f: f64 = frac
            .parse()
            .with_context(|| format!("cli: cannot parse proportion '{frac}'"))?;
        Box::new(ConstantProportion(vec![f; model.domain.dim()]))
    } else {
        bail!("cli: unknown candidate '{candidate}' (expected zero, star, or prop:<fraction>)");
    };
    let cfg = sim_config(
        ctx,
        &model,
        args.t,
        args.dt,
        args.paths,
        args.absorb_level,
        None,
        10.0,
        10_000,
    );
    let report = numeraire_check(
        &pair,
        strategy.as_ref(),
        &model.domain,
        model.covariance.as_ref(),
        &model.x0,
        &cfg,
        33,
    )?;
    let mut f = ctx.sidecar("numeraire_ratio.csv")?;
    write_numeraire_csv(&mut f, &report)?;
    ctx.emit(
        "numeraire",
        json!({
            "model": model.name,
            "candidate": candidate,
            "config": cfg,
        }),
        &report,
    )?;
    if report.monotone_pass {
        Ok(Gate::Pass)
    } else {
        Ok(Gate::Fail(
            "mean wealth ratio increased beyond 3 standard errors".into(),
        ))
    }
}

fn cmd_arbitrage(ctx: &Ctx, args: ArbitrageArgs) -> anyhow::Result<Gate> {
    let ex = registry::find(&args.example).ok_or_else(|| {
        anyhow!(
            "cli: unknown registry name '{}'; known names: {}",
            args.example,
            registry::names().join(", ")
        )
    })?;
    let t = args.t.or(ctx.file.arbitrage.t).unwrap_or(1.0);
    let horizons = match &args.horizons {
        Some(s) => parse_list(s)?,
        None => ctx
            .file
            .arbitrage
            .horizons
            .clone()
            .unwrap_or_else(|| vec![4.0, 16.0, 64.0, 256.0]),
    };
    let cfg = SimConfig {
        horizon: t,
        dt: args.dt.or(ctx.file.sim.dt).unwrap_or(ex.default_dt),
        n_paths: args.paths.or(ctx.file.sim.paths).unwrap_or(1000),
        seed: ctx.seed,
        absorb_level: ex.default_absorb_level,
        record_stride: 1,
    };
    // closed form for the half-line model; Monte-Carlo table otherwise
    let table;
    let source = if ex.name == "bessel-4.3" {
        SurvivalSource::ClosedFormBessel
    } else {
        if ex.domain.dim() != 1 {
            bail!("cli: the Monte-Carlo survival table is one-dimensional (growth module precondition)");
        }
        let (alpha, beta) = interval_of(&ex.domain);
        let t_max = horizons.iter().cloned().fold(0.0f64, f64::max);
        let nx = 17;
        let x_grid: Vec<f64> = (1..=nx)
            .map(|k| alpha + (beta - alpha) * k as f64 / (nx as f64 + 1.0))
            .collect();
        let t_grid: Vec<f64> = (0..=16).map(|k| t_max * k as f64 / 16.0 + 1e-9).collect();
        let tab_cfg = SimConfig {
            horizon: t_max,
            n_paths: 2000,
            record_stride: 0,
            ..cfg
        };
        table = SurvivalTable::build(
            &ex.domain,
            ex.covariance.as_ref(),
            t_grid,
            x_grid,
            &tab_cfg,
        )?;
        SurvivalSource::Table(&table)
    };
    let report = arbitrage_convergence(
        &ex.pair,
        &ex.domain,
        ex.covariance.as_ref(),
        &ex.x0,
        t,
        &horizons,
        &source,
        &cfg,
    )?;
    let mut f = ctx.sidecar("arbitrage_deviation.csv")?;
    write_arbitrage_csv(&mut f, &report)?;
    ctx.emit(
        "arbitrage",
        json!({
            "model": ex.name,
            "t": t,
            "horizons": horizons,
            "config": cfg,
        }),
        &report,
    )?;
    let medians: Vec<f64> = report.rows.iter().map(|r| r.median_sup_dev).collect();
    if medians.windows(2).all(|w| w[1] < w[0]) {
        Ok(Gate::Pass)
    } else {
        Ok(Gate::Fail(format!(
            "median sup-deviation not strictly decreasing: {medians:?}"
        )))
    }
}

fn cmd_sweep(ctx: &Ctx, args: SweepArgs) -> anyhow::Result<Gate> {
    let model = resolve_model(ctx, &args.model)?;
    let pair = model
        .pair
        .clone()
        .ok_or_else(|| anyhow!("cli: robustness-sweep needs a registry example with an eigenpair"))?;
    if model.domain.dim() != 1 {
        bail!("cli: drift expressions are one-dimensional (model module precondition)");
    }
    let drift_texts: Vec<String> = if args.drifts.is_empty() {
        ctx.file.sweep.drifts.clone().unwrap_or_default()
    } else {
        args.drifts.clone()
    };
    if drift_texts.is_empty() {
        bail!("cli: robustness-sweep needs at least one --drift expression");
    }
    let parsed: Vec<(String, expr::Expr)> = drift_texts
        .iter()
        .map(|t| expr::parse(t).map(|e| (t.clone(), e)))
        .collect::<Result<_, _>>()?;
    let holders: Vec<Drift1d<Box<dyn Fn(f64) -> f64 + Send + Sync>>> = parsed
        .iter()
        .map(|(_, e)| {
            let e = e.clone();
            Drift1d(Box::new(move |x| e.eval(x)) as Box<dyn Fn(f64) -> f64 + Send + Sync>)
        })
        .collect();
    let drifts: Vec<(String, &dyn DriftField)> = parsed
        .iter()
        .zip(&holders)
        .map(|((name, _), d)| (name.clone(), d as &dyn DriftField))
        .collect();
    let cfg = sim_config(
        ctx,
        &model,
        args.t,
        args.dt,
        args.paths,
        args.absorb_level,
        None,
        50.0,
        500,
    );
    let compact = args
        .compact_level
        .or(ctx.file.sweep.compact_level)
        .unwrap_or(3);
    let rows = robustness_sweep(
        &pair,
        &model.domain,
        model.covariance.as_ref(),
        &model.x0,
        &drifts,
        &cfg,
        compact,
    )?;
    ctx.emit(
        "robustness-sweep",
        json!({
            "model": model.name,
            "drifts": drift_texts,
            "compact_level": compact,
            "config": cfg,
        }),
        &rows,
    )?;
    // the growth bound is only claimed for tight runs
    let bad: Vec<&str> = rows
        .iter()
        .filter(|r| r.tight && r.g_hat < pair.lambda - 0.15)
        .map(|r| r.name.as_str())
        .collect();
    if bad.is_empty() {
        Ok(Gate::Pass)
    } else {
        Ok(Gate::Fail(format!(
            "tight drifts with growth below lambda - 0.15: {bad:?}"
        )))
    }
}
