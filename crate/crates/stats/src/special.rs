//! Distribution plumbing: log-gamma, the regularized incomplete beta
//! function, and the Student-t / F tail probabilities built on it.
//!
//! The incomplete beta uses the modified Lentz continued fraction with the
//! usual symmetry switch at `x = (a+1)/(a+b+2)`, which keeps the fraction
//! in its fast-converging region. Absolute error stays below 1e-12 over
//! the parameter ranges exercised here (verified against a quadrature
//! oracle in the acceptance suite).

use crate::error::StatError;

/// Lanczos approximation (g = 7, 9 terms).
const LANCZOS: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

/// Natural log of the gamma function for positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma needs a positive argument, got {x}");
    if x < 0.5 {
        // reflection keeps the series accurate near zero
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Continued-fraction kernel (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 500;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m_f = m as f64;
        let m2 = 2.0 * m_f;
        // even step
        let aa = m_f * (b - m_f) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + m_f) * (qab + m_f) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64, StatError> {
    if !(a > 0.0 && b > 0.0) {
        return Err(StatError::Domain(format!("beta parameters must be positive: a={a}, b={b}")));
    }
    if !(0.0..=1.0).contains(&x) || x.is_nan() {
        return Err(StatError::Domain(format!("x must lie in [0,1], got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let front =
        (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    let value = if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Two-tailed p-value of a Student-t statistic with `df` degrees of
/// freedom.
pub fn student_t_two_tailed_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    reg_inc_beta(df / 2.0, 0.5, x).expect("valid t-distribution arguments")
}

/// Student-t CDF.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let half_tail = student_t_two_tailed_p(t, df) / 2.0;
    if t >= 0.0 {
        1.0 - half_tail
    } else {
        half_tail
    }
}

/// Quantile of the Student-t distribution, by bisection on the CDF.
/// Plenty fast for the handful of critical values a report needs.
pub fn student_t_ppf(q: f64, df: f64) -> f64 {
    assert!((0.0..1.0).contains(&q) && q > 0.0, "quantile must be in (0,1), got {q}");
    if (q - 0.5).abs() < 1e-15 {
        return 0.0;
    }
    let mut lo = -1.0;
    let mut hi = 1.0;
    while student_t_cdf(lo, df) > q {
        lo *= 2.0;
    }
    while student_t_cdf(hi, df) < q {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Upper-tail probability of the F distribution: `P(F(df1, df2) > f)`.
pub fn f_sf(f: f64, df1: f64, df2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if !f.is_finite() {
        return 0.0;
    }
    let x = df2 / (df2 + df1 * f);
    reg_inc_beta(df2 / 2.0, df1 / 2.0, x).expect("valid F-distribution arguments")
}

/// F CDF, monotone in its argument.
pub fn f_cdf(f: f64, df1: f64, df2: f64) -> f64 {
    1.0 - f_sf(f, df1, df2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_values() {
        assert_eq!(reg_inc_beta(2.5, 3.5, 0.0).unwrap(), 0.0);
        assert_eq!(reg_inc_beta(2.5, 3.5, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn uniform_case_is_identity() {
        for &x in &[0.05, 0.3, 0.5, 0.77, 0.999] {
            assert!((reg_inc_beta(1.0, 1.0, x).unwrap() - x).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_case_at_half() {
        assert!((reg_inc_beta(2.0, 2.0, 0.5).unwrap() - 0.5).abs() < 1e-14);
        assert!((reg_inc_beta(7.0, 7.0, 0.5).unwrap() - 0.5).abs() < 1e-13);
    }

    #[test]
    fn complement_symmetry() {
        for &(a, b, x) in &[(2.0, 5.0, 0.3), (0.7, 1.3, 0.6), (40.0, 2.0, 0.9)] {
            let lhs = reg_inc_beta(a, b, x).unwrap();
            let rhs = 1.0 - reg_inc_beta(b, a, 1.0 - x).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "asymmetry at ({a},{b},{x})");
        }
    }

    #[test]
    fn domain_violations_error() {
        assert!(reg_inc_beta(0.0, 1.0, 0.5).is_err());
        assert!(reg_inc_beta(1.0, -2.0, 0.5).is_err());
        assert!(reg_inc_beta(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn matches_quadrature_oracle_on_spot_grid() {
        for &a in &[0.5, 1.0, 2.5, 10.0, 48.0] {
            for &b in &[0.5, 1.5, 4.0, 30.0] {
                for &x in &[0.01, 0.2, 0.5, 0.8, 0.99] {
                    let got = reg_inc_beta(a, b, x).unwrap();
                    let want = readtrace_testkit::inc_beta_quadrature(a, b, x);
                    assert!(
                        (got - want).abs() < 1e-11,
                        "I_{x}({a},{b}): {got} vs oracle {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn t_quantiles_match_known_values() {
        // classic two-sided 5% critical values
        assert!((student_t_ppf(0.975, 10.0) - 2.2281388519649385).abs() < 1e-9);
        assert!((student_t_ppf(0.975, 96.0) - 1.9849843115310182).abs() < 1e-9);
        // approaches the normal quantile for large df
        assert!((student_t_ppf(0.975, 1e7) - 1.959964).abs() < 1e-4);
        assert_eq!(student_t_ppf(0.5, 7.0), 0.0);
    }

    #[test]
    fn t_two_tailed_p_sane() {
        assert!((student_t_two_tailed_p(0.0, 12.0) - 1.0).abs() < 1e-14);
        let p = student_t_two_tailed_p(2.2281388519649385, 10.0);
        assert!((p - 0.05).abs() < 1e-10);
        assert_eq!(student_t_two_tailed_p(f64::INFINITY, 10.0), 0.0);
    }

    #[test]
    fn f_cdf_is_monotone_and_bounded() {
        let mut prev = f_cdf(0.0, 3.0, 95.0);
        for i in 1..300 {
            let f = i as f64 * 0.05;
            let cur = f_cdf(f, 3.0, 95.0);
            assert!(cur >= prev);
            assert!((0.0..=1.0).contains(&cur));
            prev = cur;
        }
    }

    #[test]
    fn f_sf_spot_checks() {
        // frozen from an independent high-precision evaluation
        assert!((f_sf(5.613235, 2.0, 96.0) - 0.004949060492725069).abs() < 1e-12);
        assert!((f_sf(1.0, 1.0, 1.0) - 0.5).abs() < 1e-12);
    }
}
