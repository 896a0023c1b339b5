//! Special functions behind the closed-form covariance families.
//!
//! Two primitive integrals recur in the singular one-dimensional examples and
//! in the inline expression grammar of the CLI; both reduce to classical
//! special functions:
//!
//! * `int_log_neg_log(x) = int_0^x log(-log y) dy
//!    = x log(-log x) + E1(-log x)` for `x in (0,1)`,
//! * `int_cos_inv_sqrt(x) = int_0^x cos(y^(-1/2)) dy
//!    = x cos(u) - sqrt(x) sin(u) + Ci(u)` with `u = x^(-1/2)`,
//!
//! where `E1` is the exponential integral and `Ci` the cosine integral.

use once_cell::sync::Lazy;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Exponential integral `E1(z) = int_z^inf e^{-t}/t dt`, `z > 0`.
pub fn exp_integral_e1(z: f64) -> f64 {
    assert!(z > 0.0, "E1 requires z > 0, got {z}");
    if z <= 1.0 {
        // power series: E1 = -gamma - ln z + sum (-1)^{k+1} z^k / (k k!)
        let mut sum = 0.0;
        let mut term = 1.0; // z^k / k!
        for k in 1..=40 {
            term *= z / k as f64;
            let add = if k % 2 == 1 { term / k as f64 } else { -term / k as f64 };
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1.0) {
                break;
            }
        }
        -EULER_GAMMA - z.ln() + sum
    } else {
        // continued fraction e^{-z} / (z + 1 - 1^2/(z + 3 - 2^2/(z + 5 - ...)))
        // evaluated by the modified Lentz method
        let tiny = 1e-300;
        let mut b = z + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for k in 1..200 {
            let a = -(k as f64) * (k as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let delta = c * d;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-z).exp() * h
    }
}

/// Cosine integral `Ci(z) = gamma + ln z + int_0^z (cos t - 1)/t dt`, `z > 0`.
pub fn cosine_integral(z: f64) -> f64 {
    assert!(z > 0.0, "Ci requires z > 0, got {z}");
    if z <= 20.0 {
        // Ci = gamma + ln z + sum_{k>=1} (-z^2)^k / (2k (2k)!)
        let mut sum = 0.0;
        let z2 = z * z;
        let mut term = 1.0; // z^{2k} / (2k)!
        for k in 1..=60 {
            let two_k = 2.0 * k as f64;
            term *= z2 / (two_k * (two_k - 1.0));
            let add = if k % 2 == 1 { -term / two_k } else { term / two_k };
            sum += add;
            if term / two_k < 1e-18 * sum.abs().max(1.0) {
                break;
            }
        }
        EULER_GAMMA + z.ln() + sum
    } else {
        // asymptotic: Ci(z) = f(z) sin z - g(z) cos z, truncated at the
        // smallest term (plenty below 1e-9 absolute for z > 20)
        let inv2 = 1.0 / (z * z);
        let mut f = 0.0;
        let mut g = 0.0;
        let mut term = 1.0; // (2k)!/z^{2k}
        let mut k = 0u32;
        loop {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            f += sign * term;
            let g_term = term * (2.0 * k as f64 + 1.0);
            g += sign * g_term;
            let next = term * (2.0 * k as f64 + 1.0) * (2.0 * k as f64 + 2.0) * inv2;
            if next > term || k > 30 {
                break;
            }
            term = next;
            k += 1;
        }
        f /= z;
        g *= inv2;
        f * z.sin() - g * z.cos()
    }
}

/// `int_0^x log(-log y) dy` for `x in (0,1)`.
pub fn int_log_neg_log(x: f64) -> f64 {
    assert!(x > 0.0 && x < 1.0, "integral defined for x in (0,1), got {x}");
    let l = -x.ln();
    x * l.ln() + exp_integral_e1(l)
}

/// `int_0^x cos(y^(-1/2)) dy` for `x > 0`.
pub fn int_cos_inv_sqrt(x: f64) -> f64 {
    assert!(x > 0.0, "integral defined for x > 0, got {x}");
    let u = 1.0 / x.sqrt();
    x * u.cos() - x.sqrt() * u.sin() + cosine_integral(u)
}

/// Smallest positive root of `int_0^x log(-log y) dy = 0`, located once by
/// bisection to 1e-12. The integrand is positive below `1/e` and negative
/// above, so the integral rises then falls through zero.
pub static LOG_INTEGRAL_ROOT: Lazy<f64> = Lazy::new(|| {
    let mut lo = 0.5;
    let mut hi = 0.99;
    debug_assert!(int_log_neg_log(lo) > 0.0 && int_log_neg_log(hi) < 0.0);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if int_log_neg_log(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
});

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with 30-digit arithmetic.
    const E1_TABLE: &[(f64, f64)] = &[
        (0.1, 1.822_923_958_419_390_6),
        (0.287_682_072_451_780_9, 0.936_930_011_012_645_6),
        (0.5, 0.559_773_594_776_160_8),
        (1.0, 0.219_383_934_395_520_27),
        (2.0, 0.048_900_510_708_061_12),
        (5.0, 1.148_295_591_275_325_8e-3),
        (10.0, 4.156_968_929_685_324e-6),
        (20.0, 9.835_525_290_649_881e-11),
    ];

    const CI_TABLE: &[(f64, f64)] = &[
        (0.141_421_356_237_309_5, -1.383_791_672_997_229_4),
        (0.5, -0.177_784_078_806_612_9),
        (1.0, 0.337_403_922_900_968_13),
        (1.414_213_562_373_095_1, 0.463_652_802_366_863_65),
        (5.0, -0.190_029_749_656_643_88),
        (15.0, 0.046_278_677_674_360_44),
        (18.0, -0.043_475_102_999_501),
        (25.0, -6.848_597_179_702_59e-3),
        (100.0, -5.148_825_142_610_49e-3),
    ];

    #[test]
    fn e1_matches_reference() {
        for &(z, want) in E1_TABLE {
            let got = exp_integral_e1(z);
            assert!(
                (got - want).abs() <= 1e-14 * want.abs().max(1e-12),
                "E1({z}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn ci_matches_reference() {
        for &(z, want) in CI_TABLE {
            let got = cosine_integral(z);
            let tol = if z > 14.0 { 2e-9 } else { 1e-13 };
            assert!(
                (got - want).abs() <= tol,
                "Ci({z}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert!((2.0 * normal_cdf(1.0) - 1.0 - 0.682_689_492_137_085_9).abs() < 1e-15);
        assert!((2.0 * normal_cdf(0.5) - 1.0 - 0.382_924_922_548_026_2).abs() < 1e-15);
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_integral_values() {
        // mpmath: J(0.1), J(0.3), J(0.5), J(0.7)
        let table = [
            (0.1, 0.115_793_034_118_087),
            (0.3, 0.213_102_930_553_399),
            (0.5, 0.195_414_582_770_256),
            (0.7, 0.059_295_574_334_454_6),
        ];
        for (x, want) in table {
            let got = int_log_neg_log(x);
            assert!((got - want).abs() < 1e-13, "J({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn cos_integral_values() {
        // mpmath: I(0.3), I(0.5), I(2), I(50)
        let table = [
            (0.3, -0.152_268_628_766),
            (0.5, -0.156_831_348_887),
            (2.0, 0.709_981_323_293),
            (50.0, 47.120_371_106_6),
        ];
        for (x, want) in table {
            let got = int_cos_inv_sqrt(x);
            assert!(
                (got - want).abs() < 1e-10 * want.abs().max(1.0),
                "I({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn root_of_log_integral() {
        let xhat = *LOG_INTEGRAL_ROOT;
        assert!((xhat - 0.752_003_528_980_822_1).abs() < 1e-11, "xhat = {xhat}");
        assert!(int_log_neg_log(xhat - 1e-6) > 0.0);
        assert!(int_log_neg_log(xhat + 1e-6) < 0.0);
    }
}
