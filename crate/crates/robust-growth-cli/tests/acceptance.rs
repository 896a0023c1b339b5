//! Acceptance suite: one test per numbered criterion, each printing a
//! pass/fail line with the measured values. Run with
//! `cargo test -p robust-growth-cli --test acceptance -- --nocapture`.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use robust_growth::closedform::{hopf_statistic, pde_residual, GbmSpec, SimplexSpec};
use robust_growth::eigen1d::{
    integral_test, pointwise_test, recurrence_class, solve_principal_eigenpair, LambdaSign,
    RecurrenceClass, ShootConfig,
};
use robust_growth::growth::{
    arbitrage_convergence, growth_rate, numeraire_check, wealth_star, ConstantProportion,
    SurvivalSource, ZeroStrategy,
};
use robust_growth::model::Cov1d;
use robust_growth::registry;
use robust_growth::sde::{exit_identity_check, exit_probability, simulate, Measure, SimConfig};
use robust_growth::specfun::normal_cdf;

fn status(n: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {n:2} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

#[test]
fn criterion_01_regular_sturm_liouville() {
    let started = Instant::now();
    let cov = Cov1d::with_orders(|_| 1.0, 0.0, 0.0);
    let sol = solve_principal_eigenpair(
        &cov,
        (0.0, 1.0),
        &[1e-3, 1e-4, 1e-5],
        &ShootConfig::default(),
        None,
    )
    .unwrap();
    let want = PI * PI / 2.0;
    let rel = ((sol.pair.lambda - want) / want).abs();
    let elapsed = started.elapsed().as_secs_f64();
    let pass = rel <= 1e-6 && elapsed < 1.0;
    status(
        1,
        "regular Sturm-Liouville",
        pass,
        &format!("lambda = {:.9} (rel err {rel:.2e}), {elapsed:.2}s", sol.pair.lambda),
    );
    assert!(pass, "rel err {rel}, elapsed {elapsed}");
}

#[test]
fn criterion_02_singular_solver() {
    // Wright-Fisher covariance
    let started = Instant::now();
    let cov1 = Cov1d::with_orders(|x: f64| x * (1.0 - x), 1.0, 1.0);
    let sol1 = solve_principal_eigenpair(
        &cov1,
        (0.0, 1.0),
        &[1e-3, 1e-4, 1e-5],
        &ShootConfig::default(),
        None,
    )
    .unwrap();
    let e1 = started.elapsed().as_secs_f64();
    let err1 = (sol1.pair.lambda - 1.0).abs();
    let mut shape1: f64 = 0.0;
    for k in 0..=160 {
        let x = 0.1 + 0.8 * k as f64 / 160.0;
        let want = x * (1.0 - x) / 0.25;
        shape1 = shape1.max((sol1.pair.eta(&[x]) - want).abs());
    }

    let started2 = Instant::now();
    let cov2 = Cov1d::with_orders(|x: f64| (x * (1.0 - x)).powi(2), 2.0, 2.0);
    let sol2 = solve_principal_eigenpair(
        &cov2,
        (0.0, 1.0),
        &[1e-6, 1e-8, 1e-10],
        &ShootConfig::default(),
        None,
    )
    .unwrap();
    let e2 = started2.elapsed().as_secs_f64();
    let err2 = (sol2.pair.lambda - 0.125).abs();
    let mut shape2: f64 = 0.0;
    for k in 0..=160 {
        let x = 0.1 + 0.8 * k as f64 / 160.0;
        let want = (x * (1.0 - x)).sqrt() / 0.5;
        shape2 = shape2.max((sol2.pair.eta(&[x]) - want).abs());
    }

    let pass = err1 <= 1e-3
        && err2 <= 1e-3
        && shape1 <= 1e-3
        && shape2 <= 1e-3
        && e1 < 10.0
        && e2 < 10.0;
    status(
        2,
        "singular solver",
        pass,
        &format!(
            "lambda errs ({err1:.2e}, {err2:.2e}), shape errs ({shape1:.2e}, {shape2:.2e}), {e1:.1}s / {e2:.1}s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_classification_suite() {
    let wf = Cov1d::with_orders(|x: f64| x * (1.0 - x), 1.0, 1.0);
    let wf3 = Cov1d::with_orders(|x: f64| (x * (1.0 - x)).powi(3), 3.0, 3.0);
    let interval = (0.0, 1.0);

    let it_pos = integral_test(&wf, interval, 1e-9).unwrap().verdict;
    let it_zero = integral_test(&wf3, interval, 1e-9).unwrap().verdict;
    let pw_zero = pointwise_test(&wf3, interval, 1024).unwrap().verdict;
    let pw_pos = pointwise_test(&wf, interval, 1024).unwrap().verdict;

    let ex1 = registry::find("ex-6.1.1").unwrap();
    let ex2 = registry::find("ex-6.1.2").unwrap();
    let rec1 = recurrence_class(&ex1.pair, ex1.covariance.as_ref(), interval);
    let rec2 = recurrence_class(&ex2.pair, ex2.covariance.as_ref(), interval);

    let pass = it_pos == LambdaSign::Positive
        && it_zero == LambdaSign::Zero
        && pw_zero == LambdaSign::Zero
        && pw_pos == LambdaSign::Positive
        && rec1 == RecurrenceClass::PositiveRecurrent
        && rec2 == RecurrenceClass::NullRecurrent;
    status(
        3,
        "classification suite",
        pass,
        &format!(
            "integral: ({it_pos:?}, {it_zero:?}), pointwise: ({pw_pos:?}, {pw_zero:?}), recurrence: ({rec1:?}, {rec2:?})"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_closed_forms() {
    let started = Instant::now();
    let a = registry::example_matrix();
    let gbm = GbmSpec::new(a.clone()).unwrap();
    let b = gbm.b_hat();
    let b_err = (b[0] + 1.75)
        .abs()
        .max((b[1] - 1.25).abs())
        .max((b[2] - 0.5).abs());
    let lam_err = (gbm.lambda() - 19.0 / 12.0).abs();

    let simplex = SimplexSpec::new(a).unwrap();
    let sb = simplex.b_hat();
    let sb_err = (sb[0] + 1.0).abs().max((sb[1] - 1.0).abs());
    let slam_err = (simplex.lambda() - 4.0 / 3.0).abs();

    // residuals on 1000 random interior points each
    let gx = registry::find("gbm-6.2.1").unwrap();
    let r_gbm = registry::verify_example(&gx).unwrap();
    let sx = registry::find("simplex-6.2.1").unwrap();
    let r_simplex = registry::verify_example(&sx).unwrap();
    let elapsed = started.elapsed().as_secs_f64();

    let pass = b_err <= 1e-12
        && lam_err <= 1e-12
        && sb_err <= 1e-12
        && slam_err <= 1e-12
        && r_gbm.pass
        && r_simplex.pass
        && elapsed < 5.0;
    status(
        4,
        "closed forms",
        pass,
        &format!(
            "b err {b_err:.1e}, lambda errs ({lam_err:.1e}, {slam_err:.1e}), residuals ({:.2e}, {:.2e}), {elapsed:.1}s",
            r_gbm.residual_max, r_simplex.residual_max
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_exit_probability() {
    let started = Instant::now();
    let ex = registry::find("bessel-4.3").unwrap();
    let cfg = SimConfig::new(1.0, 1e-4, 100_000, 0, 20);
    let ens = simulate(
        &Measure::DominatingQ,
        &ex.domain,
        ex.covariance.as_ref(),
        &[1.0],
        &cfg,
    )
    .unwrap();
    let (p, se) = exit_probability(&ens, 1.0).unwrap();
    let want = 2.0 * normal_cdf(1.0) - 1.0;
    let elapsed = started.elapsed().as_secs_f64();
    let pass = (p - want).abs() <= 3.0 * se && elapsed < 60.0;
    status(
        5,
        "exit probability",
        pass,
        &format!(
            "estimate {p:.6} vs {want:.6} ({}se), {elapsed:.1}s",
            ((p - want) / se).abs().round()
        ),
    );
    assert!(pass, "p = {p}, want {want}, se = {se}, elapsed {elapsed}");
}

#[test]
fn criterion_06_exit_identity() {
    let started = Instant::now();
    let ex = registry::find("ex-6.1.1").unwrap();
    let cfg = SimConfig::new(2.0, 5e-4, 100_000, 0, 4);
    let out = exit_identity_check(
        &ex.domain,
        ex.covariance.as_ref(),
        &ex.pair,
        &[0.5],
        2.0,
        &cfg,
    )
    .unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let pass = out.pass && elapsed < 120.0;
    status(
        6,
        "exit identity",
        pass,
        &format!(
            "lhs {:.5} vs rhs {:.5} (combined se {:.5}), {elapsed:.1}s",
            out.lhs, out.rhs, out.combined_se
        ),
    );
    assert!(pass, "{out:?}, elapsed {elapsed}");
}

#[test]
fn criterion_07_growth() {
    let started = Instant::now();
    // Wright-Fisher example at t = 200
    let ex = registry::find("ex-6.1.1").unwrap();
    let cfg = SimConfig::new(200.0, 1e-3, 1000, 0, 4).with_stride(200_000);
    let ens = simulate(
        &Measure::Star(&ex.pair),
        &ex.domain,
        ex.covariance.as_ref(),
        &[0.5],
        &cfg,
    )
    .unwrap();
    let wealth = wealth_star(&ex.pair, &ens).unwrap();
    let last = wealth.times.len() - 1;
    let t = wealth.times[last];
    let frac_above = wealth
        .paths
        .iter()
        .filter(|p| p.values[last].ln() / t >= 0.9)
        .count() as f64
        / wealth.paths.len() as f64;
    let rep = growth_rate(&wealth, None).unwrap();
    let wf_pass = frac_above >= 0.95 && (0.9..=1.1).contains(&rep.g_hat);

    // geometric Brownian motion example at the same horizon
    let gx = registry::find("gbm-6.2.1").unwrap();
    let gcfg = SimConfig::new(200.0, 5e-4, 1000, 0, 4).with_stride(400_000);
    let gens = simulate(
        &Measure::Star(&gx.pair),
        &gx.domain,
        gx.covariance.as_ref(),
        &gx.x0,
        &gcfg,
    )
    .unwrap();
    let gwealth = wealth_star(&gx.pair, &gens).unwrap();
    let grep = growth_rate(&gwealth, None).unwrap();
    let lambda = gx.pair.lambda;
    let gbm_pass = (grep.g_hat - lambda).abs() <= 0.1;
    let elapsed = started.elapsed().as_secs_f64();

    let pass = wf_pass && gbm_pass && elapsed < 120.0;
    status(
        7,
        "growth",
        pass,
        &format!(
            "wf: frac {frac_above:.3}, g_hat {:.3} (band [0.9, 1.1]); gbm: g_hat {:.3} vs lambda {:.3} (band +-0.1); {elapsed:.0}s",
            rep.g_hat, grep.g_hat, lambda
        ),
    );
    // The gbm half of this criterion is analytically unattainable at t = 200:
    // the 0.95-threshold statistic of (1/t) log V sits 1.645 sigma below
    // lambda, and sigma = sqrt(2 lambda / t) = 0.126, so the estimator
    // concentrates at lambda - 0.207, outside the +-0.1 band, for any
    // correct simulation. The criterion is asserted as stated.
    assert!(
        pass,
        "wf: frac {frac_above}, g_hat {} in [0.9,1.1]: {wf_pass}; gbm: g_hat {} vs lambda {lambda} +-0.1: {gbm_pass} \
         (expected analytic value lambda - 1.645*sqrt(2 lambda/200) = {:.3})",
        rep.g_hat,
        grep.g_hat,
        lambda - 1.645 * (2.0 * lambda / 200.0).sqrt()
    );
}

#[test]
fn criterion_08_numeraire_property() {
    let started = Instant::now();
    let ex = registry::find("ex-6.1.1").unwrap();
    let cfg = SimConfig::new(10.0, 1e-3, 10_000, 0, 4);
    let zero = numeraire_check(
        &ex.pair,
        &ZeroStrategy,
        &ex.domain,
        ex.covariance.as_ref(),
        &[0.5],
        &cfg,
        33,
    )
    .unwrap();
    let prop = numeraire_check(
        &ex.pair,
        &ConstantProportion(vec![0.5]),
        &ex.domain,
        ex.covariance.as_ref(),
        &[0.5],
        &SimConfig {
            seed: 1,
            ..cfg
        },
        33,
    )
    .unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let pass = zero.monotone_pass && prop.monotone_pass && elapsed < 60.0;
    status(
        8,
        "numeraire property",
        pass,
        &format!(
            "zero: {} (ratio {:.4} -> {:.4}), prop 1/2: {} (ratio {:.4} -> {:.4}), {elapsed:.0}s",
            zero.monotone_pass,
            zero.mean_ratio[0],
            zero.mean_ratio.last().unwrap(),
            prop.monotone_pass,
            prop.mean_ratio[0],
            prop.mean_ratio.last().unwrap()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_arbitrage_convergence() {
    let started = Instant::now();
    let ex = registry::find("bessel-4.3").unwrap();
    let cfg = SimConfig::new(1.0, 1e-4, 1000, 0, 20).with_stride(1);
    let rep = arbitrage_convergence(
        &ex.pair,
        &ex.domain,
        ex.covariance.as_ref(),
        &[1.0],
        1.0,
        &[4.0, 16.0, 64.0, 256.0],
        &SurvivalSource::ClosedFormBessel,
        &cfg,
    )
    .unwrap();
    let meds: Vec<f64> = rep.rows.iter().map(|r| r.median_sup_dev).collect();
    let zs: Vec<f64> = rep.rows.iter().map(|r| r.mean_abs_z_minus_1).collect();
    let monotone =
        meds.windows(2).all(|w| w[1] < w[0]) && zs.windows(2).all(|w| w[1] < w[0]);
    let elapsed = started.elapsed().as_secs_f64();
    let pass = monotone && elapsed < 60.0;
    status(
        9,
        "arbitrage convergence",
        pass,
        &format!("medians {meds:?}, z-stats {zs:?}, {elapsed:.0}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_10_hopf_statistic_oscillatory_example() {
    let ex = registry::find("ex-6.1.5").unwrap();
    // sample the near-zero complement region of a deep exhaustion level
    let mut domain = ex.domain.clone();
    domain.exhaustion_count = 2_000_002;
    let n = 2_000_000;
    let (inf_q, sup_q) = hopf_statistic(
        &ex.pair,
        ex.covariance.as_ref(),
        &domain,
        n,
        200_000,
    )
    .unwrap();
    let lambda = ex.pair.lambda;
    let sup_dev = sup_q - lambda;
    let inf_dev = inf_q - lambda;
    let pass = (sup_dev - 0.0).abs() <= 1e-2 && (inf_dev + 2.0 / 3.0).abs() <= 1e-2;
    status(
        10,
        "hopf statistic",
        pass,
        &format!(
            "sampled (limsup, liminf) of q - lambda = ({sup_dev:.4}, {inf_dev:.4}); required (0, -2/3)"
        ),
    );
    // The required values are unattainable from the shipped formulas: with
    // eta = I(x) + 4 sqrt(x) - x and the stated covariance, the quadratic
    // form satisfies q = 2/(2 - sin(x^{-1/2})) + O(x^{1/2}) near zero, so
    // (limsup, liminf) of q - lambda equal (1, -1/3) exactly. The sampled
    // values above confirm that asymptotic; the criterion is asserted as
    // stated and records the discrepancy.
    assert!(
        pass,
        "sampled (sup, inf) = ({sup_dev:.4}, {inf_dev:.4}); the analytic range of q - lambda is [-1/3, 1]"
    );
}

#[test]
fn criterion_11_determinism_across_workers() {
    // library-level digest equality across worker counts
    let ex = registry::find("ex-6.1.1").unwrap();
    let cfg = SimConfig::new(1.0, 1e-3, 500, 9, 4);
    let digests: Vec<u64> = [1usize, 4, 8]
        .iter()
        .map(|&threads| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                simulate(
                    &Measure::DominatingQ,
                    &ex.domain,
                    ex.covariance.as_ref(),
                    &[0.5],
                    &cfg,
                )
                .unwrap()
                .digest()
            })
        })
        .collect();
    let lib_ok = digests[0] == digests[1] && digests[1] == digests[2];

    // binary-level byte-exact reports across 1, 4, 8 workers
    let bin = env!("CARGO_BIN_EXE_robust-growth");
    let reports: Vec<String> = [1usize, 4, 8]
        .iter()
        .map(|&threads| {
            let dir = std::env::temp_dir().join(format!("rg-acc-{threads}"));
            let _ = std::fs::remove_dir_all(&dir);
            let out = Command::new(bin)
                .args([
                    "--seed",
                    "0",
                    "--threads",
                    &threads.to_string(),
                    "--out",
                    dir.to_str().unwrap(),
                    "simulate",
                    "--example",
                    "ex-6.1.1",
                    "--measure",
                    "star",
                    "--t",
                    "0.5",
                    "--dt",
                    "1e-3",
                    "--paths",
                    "2000",
                ])
                .output()
                .expect("binary runs");
            assert!(out.status.success(), "simulate failed: {out:?}");
            let text = std::fs::read_to_string(dir.join("simulate.json")).unwrap();
            text.lines()
                .filter(|l| !l.contains("wall_clock_ms"))
                .collect::<Vec<_>>()
                .join("\n")
        })
        .collect();
    let bin_ok = reports[0] == reports[1] && reports[1] == reports[2];

    let pass = lib_ok && bin_ok;
    status(
        11,
        "determinism across workers",
        pass,
        &format!("ensemble digests equal: {lib_ok}, reports byte-identical: {bin_ok}"),
    );
    assert!(pass);
}

#[test]
fn criterion_04b_verify_cli_gate() {
    // the CLI gate behavior belongs to the acceptance surface: pass -> 0
    let bin = env!("CARGO_BIN_EXE_robust-growth");
    let dir = std::env::temp_dir().join("rg-acc-verify");
    let _ = std::fs::remove_dir_all(&dir);
    let out = Command::new(bin)
        .args(["--out", dir.to_str().unwrap(), "verify-example", "gbm-6.2.1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"pass\": true"));
}

#[test]
fn criterion_10b_residual_of_oscillatory_example() {
    // the residual half of the oscillatory-example checks: < 1e-4 on [0.5, 50]
    let ex = registry::find("ex-6.1.5").unwrap();
    let grid: Vec<Vec<f64>> = (0..1000)
        .map(|k| vec![0.5 + (50.0 - 0.5) * k as f64 / 999.0])
        .collect();
    let r = pde_residual(&ex.pair, ex.covariance.as_ref(), &ex.domain, &grid, 1e-3).unwrap();
    assert!(r < 1e-4, "residual {r}");
}

#[test]
fn criterion_extra_eigenpair_registry_consistency() {
    // solver output matches the exact closed forms shipped in the registry
    // (simplex d = 2 diagonal case against the one-dimensional solver)
    let a = nalgebra_matrix_diag(0.6, 0.4);
    let spec = SimplexSpec::new(a).unwrap();
    assert!((spec.lambda() - 0.125).abs() < 1e-13);
    // the one-dimensional solver runs on the scalar form (a+b) x^2 (1-x)^2
    let cov = Cov1d::with_orders(|x: f64| (x * (1.0 - x)).powi(2), 2.0, 2.0);
    let sol = solve_principal_eigenpair(
        &cov,
        (0.0, 1.0),
        &[1e-6, 1e-8, 1e-10],
        &ShootConfig::default(),
        None,
    )
    .unwrap();
    assert!(
        (sol.pair.lambda - spec.lambda()).abs() < 1e-3,
        "solver {} vs closed form {}",
        sol.pair.lambda,
        spec.lambda()
    );
    let pair = spec.eigenpair(&[0.5]).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..=80 {
        let x = 0.1 + 0.8 * k as f64 / 80.0;
        worst = worst.max((sol.pair.eta(&[x]) - pair.eta(&[x])).abs());
    }
    assert!(worst < 1e-3, "eigenfunction mismatch {worst}");
}

fn nalgebra_matrix_diag(a: f64, b: f64) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b])
}
