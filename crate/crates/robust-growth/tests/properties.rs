//! Cross-module property suites: distributional checks that need full
//! simulations, plus randomized structural invariants.

use std::sync::Arc;

use proptest::prelude::*;

use robust_growth::eigen1d::{pointwise_test, shoot_eigenvalue, ShootConfig};
use robust_growth::interp::{chebyshev_nodes, PchipCurve};
use robust_growth::model::{Cov1d, DomainSpec, Eigenpair};
use robust_growth::registry;
use robust_growth::sde::{exit_probability, simulate, Measure, SimConfig};

fn wf_pair() -> Eigenpair {
    Eigenpair::new(
        1.0,
        vec![0.5],
        Arc::new(|x: &[f64]| x[0] * (1.0 - x[0])),
        Arc::new(|x: &[f64], g: &mut [f64]| {
            g[0] = (1.0 - 2.0 * x[0]) / (x[0] * (1.0 - x[0]));
        }),
    )
    .unwrap()
}

/// Beta(2,2) cumulative distribution function.
fn beta22_cdf(x: f64) -> f64 {
    (x * x * (3.0 - 2.0 * x)).clamp(0.0, 1.0)
}

#[test]
fn tilted_wright_fisher_equilibrates_to_beta22() {
    // the long-run law of the tilted process has density proportional to
    // eta^2/c = x(1-x); Kolmogorov-Smirnov distance at t = 50 under 0.02
    let pair = wf_pair();
    let cov = Cov1d::with_orders(|x: f64| x * (1.0 - x), 1.0, 1.0);
    let domain = DomainSpec::interval(0.0, 1.0).unwrap();
    let cfg = SimConfig::new(50.0, 1e-3, 10_000, 101, 4);
    let ens = simulate(&Measure::Star(&pair), &domain, &cov, &[0.5], &cfg).unwrap();
    // discrete steps can very rarely jump a path over the degenerate
    // boundary; tolerate a sub-0.1% loss and test the survivors
    assert!(ens.absorbed_count() <= 10, "absorbed {}", ens.absorbed_count());
    let mut samples: Vec<f64> = ens.terminal_states().iter().map(|x| x[0]).collect();
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut ks: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = beta22_cdf(x);
        ks = ks.max((f - i as f64 / n).abs());
        ks = ks.max(((i + 1) as f64 / n - f).abs());
    }
    assert!(ks <= 0.02, "KS distance {ks}");
}

#[test]
fn scaled_tail_ratio_recovers_eigenfunction_ratio() {
    // exp(lambda t) Q[exit > t] converges to kappa * eta(x0): estimates from
    // two starting points recover eta(1/4)/eta(1/2) = 0.75
    let cov = Cov1d::with_orders(|x: f64| x * (1.0 - x), 1.0, 1.0);
    let domain = DomainSpec::interval(0.0, 1.0).unwrap();
    let t = 2.5;
    let run = |x0: f64, seed: u64| {
        let cfg = SimConfig::new(t, 5e-4, 40_000, seed, 4);
        let ens = simulate(&Measure::DominatingQ, &domain, &cov, &[x0], &cfg).unwrap();
        exit_probability(&ens, t).unwrap()
    };
    let (p_half, se_half) = run(0.5, 7);
    let (p_quarter, se_quarter) = run(0.25, 8);
    let ratio = p_quarter / p_half;
    let rel_se = ((se_quarter / p_quarter).powi(2) + (se_half / p_half).powi(2)).sqrt();
    let se_ratio = ratio * rel_se;
    assert!(
        (ratio - 0.75).abs() <= 3.0 * se_ratio,
        "ratio = {ratio} (se {se_ratio}), want 0.75"
    );
}

#[test]
fn pointwise_witness_stays_below_shooting_eigenvalue() {
    // the constructive lower bound can never exceed the solved eigenvalue
    let cases: [(&str, f64); 3] = [("ex-6.1.1", 1.0), ("ex-6.1.2", 0.125), ("ex-6.1.4", 1.0)];
    for (name, lambda) in cases {
        let ex = registry::find(name).unwrap();
        let (alpha, beta) = match ex.domain.kind {
            robust_growth::model::DomainKind::Interval { alpha, beta } => (alpha, beta),
            _ => unreachable!(),
        };
        let pw = pointwise_test(ex.covariance.as_ref(), (alpha, beta), 1024).unwrap();
        if let Some(bound) = pw.lambda_lower_bound {
            assert!(
                bound <= lambda + 1e-9,
                "{name}: witness {bound} exceeds lambda {lambda}"
            );
        }
    }
}

#[test]
fn eigenvalue_scaling_through_the_full_solver() {
    // c -> k c scales the shot eigenvalue by exactly k
    let cfg = ShootConfig {
        lambda_tol: 1e-11,
        ..Default::default()
    };
    let base = Cov1d::with_orders(|x: f64| x * (1.0 - x), 1.0, 1.0);
    let lam = shoot_eigenvalue(&base, (0.0, 1.0), 1e-4, &cfg).unwrap();
    for k in [0.5, 2.0] {
        let scaled = Cov1d::with_orders(move |x: f64| k * x * (1.0 - x), 1.0, 1.0);
        let lam_k = shoot_eigenvalue(&scaled, (0.0, 1.0), 1e-4, &cfg).unwrap();
        let rel = (lam_k - k * lam).abs() / (k * lam);
        assert!(rel < 1e-8, "k = {k}: relative deviation {rel}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exhaustion_nesting_chain(
        x in 0.0001f64..0.9999,
        n in 0usize..34,
    ) {
        let domain = DomainSpec::interval(0.0, 1.0).unwrap();
        let inner = domain.exhaustion_member(n, &[x]).unwrap();
        let outer = domain.exhaustion_member(n + 1, &[x]).unwrap();
        prop_assert!(!inner || outer);
        prop_assert!(domain.contains(&[x]));
    }

    #[test]
    fn pchip_stays_within_node_range(
        raw in proptest::collection::vec(0.01f64..10.0, 8..30),
    ) {
        let n = raw.len();
        let xs = chebyshev_nodes(0.0, 1.0, n);
        let curve = PchipCurve::new(xs, raw.clone());
        let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for k in 0..=200 {
            let x = k as f64 / 200.0;
            let v = curve.eval(x);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12,
                "interpolant {v} escaped [{lo}, {hi}]");
        }
    }

    #[test]
    fn eigen_wealth_starts_at_one_for_any_anchor(
        anchor in 0.05f64..0.95,
    ) {
        let pair = Eigenpair::new(
            1.0,
            vec![anchor],
            Arc::new(|x: &[f64]| x[0] * (1.0 - x[0])),
            Arc::new(|x: &[f64], g: &mut [f64]| {
                g[0] = (1.0 - 2.0 * x[0]) / (x[0] * (1.0 - x[0]));
            }),
        ).unwrap();
        prop_assert_eq!(pair.eta(&[anchor]), 1.0);
    }
}
