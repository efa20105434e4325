//! Chi-square distribution helpers.
//!
//! Only what the crate actually needs: the regularized incomplete gamma
//! function driving the chi-square CDF/survival function, and a robust
//! quantile used by tests and diagnostics. None of this sits on a hot path.

/// Natural log of the gamma function (Lanczos approximation, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection formula keeps the approximation in its accurate range
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, c) in COEF.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma function P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x.is_finite(), "gamma_p needs a > 0 and finite x");
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// Regularized upper incomplete gamma function Q(a, x) = 1 - P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x.is_finite(), "gamma_q needs a > 0 and finite x");
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..500 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

// Modified Lentz continued fraction for Q(a, x), valid for x >= a + 1.
fn gamma_q_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-x + a * x.ln() - ln_gamma(a)).exp()
}

/// CDF of the chi-square distribution with `df` degrees of freedom.
pub fn chi2_cdf(df: f64, x: f64) -> f64 {
    assert!(df > 0.0, "chi2_cdf needs df > 0");
    if x <= 0.0 {
        return 0.0;
    }
    gamma_p(df / 2.0, x / 2.0)
}

/// Survival function (upper tail) of the chi-square distribution.
pub fn chi2_sf(df: f64, x: f64) -> f64 {
    assert!(df > 0.0, "chi2_sf needs df > 0");
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(df / 2.0, x / 2.0)
}

/// Quantile of the chi-square distribution, by bisection.
pub fn chi2_quantile(df: f64, p: f64) -> f64 {
    assert!(df > 0.0 && p > 0.0 && p < 1.0, "chi2_quantile needs df > 0 and p in (0, 1)");
    let mut hi = (2.0 * df).max(2.0);
    let mut tries = 0;
    while chi2_cdf(df, hi) < p {
        hi *= 2.0;
        tries += 1;
        assert!(tries < 200, "chi2_quantile failed to bracket");
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(df, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        // Gamma(1) = Gamma(2) = 1, Gamma(5) = 24, Gamma(1/2) = sqrt(pi)
        assert!((ln_gamma(1.0)).abs() < 1e-13);
        assert!((ln_gamma(2.0)).abs() < 1e-13);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-13);
    }

    #[test]
    fn chi2_cdf_closed_form_even_df() {
        // df = 2: CDF(x) = 1 - exp(-x/2); df = 4: 1 - exp(-x/2) (1 + x/2)
        for &x in &[0.01, 0.5, 1.0, 2.7, 5.99, 11.3, 30.0] {
            let c2 = 1.0 - (-x / 2.0f64).exp();
            assert!((chi2_cdf(2.0, x) - c2).abs() < 1e-12, "df=2 x={x}");
            let c4 = 1.0 - (-x / 2.0f64).exp() * (1.0 + x / 2.0);
            assert!((chi2_cdf(4.0, x) - c4).abs() < 1e-12, "df=4 x={x}");
        }
    }

    #[test]
    fn chi2_cdf_one_df_matches_normal_tail_law() {
        // chi2_1 = Z^2, so CDF at 1, 4, 9 follows the 68-95-99.7 law
        assert!((chi2_cdf(1.0, 1.0) - 0.6826894921370859).abs() < 1e-10);
        assert!((chi2_cdf(1.0, 4.0) - 0.9544997361036416).abs() < 1e-10);
        assert!((chi2_cdf(1.0, 9.0) - 0.9973002039367398).abs() < 1e-10);
    }

    #[test]
    fn chi2_quantile_reference_values() {
        assert!((chi2_quantile(1.0, 0.95) - 3.841458820694124).abs() < 1e-9);
        assert!((chi2_quantile(2.0, 0.95) - 5.991464547107979).abs() < 1e-9);
        assert!((chi2_quantile(5.0, 0.95) - 11.070497693516351).abs() < 1e-8);
    }

    #[test]
    fn quantile_round_trips_through_cdf() {
        for &df in &[1.0, 3.0, 9.0, 24.0] {
            for &p in &[0.01, 0.25, 0.5, 0.9, 0.95, 0.999] {
                let q = chi2_quantile(df, p);
                assert!((chi2_cdf(df, q) - p).abs() < 1e-10, "df={df} p={p}");
            }
        }
    }

    #[test]
    fn sf_complements_cdf() {
        for &df in &[1.0, 2.0, 7.0] {
            for &x in &[0.3, 1.0, 4.2, 19.0] {
                let s = chi2_cdf(df, x) + chi2_sf(df, x);
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }
}
