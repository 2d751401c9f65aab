//! Special functions backing the beta soft labels and the test statistics.
//!
//! Everything here is `f64`, pure, and returns an [`Error`] rather than a
//! NaN when an argument leaves the domain or an expansion fails to converge.

use crate::error::{domain, Error, Result};

/// Iteration cap shared by the continued fractions and series.
pub const MAX_ITER: usize = 300;
const EPS: f64 = 1e-15;
const FPMIN: f64 = 1e-300;

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Closed interval inside `[0, 1]`, used for the class segments of the
/// discretised beta density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealInterval {
    lo: f64,
    hi: f64,
}

impl RealInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi > 1.0 || lo > hi {
            return Err(Error::InvalidParameter(format!(
                "interval [{lo}, {hi}] is not inside [0, 1]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Probability mass of a Beta(a, b) variable inside the interval.
    pub fn beta_mass(&self, a: f64, b: f64) -> Result<f64> {
        Ok(reg_inc_beta(self.hi, a, b)? - reg_inc_beta(self.lo, a, b)?)
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("log_gamma", format!("x = {x} must be positive")));
    }
    Ok(ln_gamma_unchecked(x))
}

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma_unchecked(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `ln B(a, b)`.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    Ok(log_gamma(a)? + log_gamma(b)? - log_gamma(a + b)?)
}

/// `ln C(n, k)` for integers `0 <= k <= n`.
pub fn log_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(domain("log_binomial", format!("k = {k} exceeds n = {n}")));
    }
    if k == 0 || k == n {
        return Ok(0.0);
    }
    Ok(ln_gamma_unchecked(n as f64 + 1.0)
        - ln_gamma_unchecked(k as f64 + 1.0)
        - ln_gamma_unchecked((n - k) as f64 + 1.0))
}

/// `C(n, k)` as a float, computed by the multiplicative formula so small
/// arguments are exact.
pub fn binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(domain("binomial", format!("k = {k} exceeds n = {n}")));
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    Ok(if acc < 9.0e15 { acc.round() } else { acc })
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(domain(
            "reg_inc_beta",
            format!("need 0 <= x <= 1, a > 0, b > 0 (x = {x}, a = {a}, b = {b})"),
        ));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln()
        - (ln_gamma_unchecked(a) + ln_gamma_unchecked(b) - ln_gamma_unchecked(a + b));
    let front = ln_front.exp();
    let value = if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b)? / a
    } else {
        1.0 - front * beta_cf(1.0 - x, b, a)? / b
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence {
        func: "reg_inc_beta",
        iterations: MAX_ITER,
    })
}

fn check_gamma_args(func: &'static str, s: f64, x: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() || !(x >= 0.0) {
        return Err(domain(
            func,
            format!("need s > 0, x >= 0 (s = {s}, x = {x})"),
        ));
    }
    Ok(())
}

/// Regularized lower incomplete gamma `P(s, x)`.
pub fn reg_inc_gamma_lower(s: f64, x: f64) -> Result<f64> {
    check_gamma_args("reg_inc_gamma_lower", s, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    if x < s + 1.0 {
        gamma_series(s, x)
    } else {
        Ok(1.0 - gamma_cf(s, x)?)
    }
}

/// Regularized upper incomplete gamma `Q(s, x) = 1 - P(s, x)`, evaluated
/// directly in the tail so small values keep their relative precision.
pub fn reg_inc_gamma_upper(s: f64, x: f64) -> Result<f64> {
    check_gamma_args("reg_inc_gamma_upper", s, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x < s + 1.0 {
        Ok(1.0 - gamma_series(s, x)?)
    } else {
        gamma_cf(s, x)
    }
}

fn gamma_series(s: f64, x: f64) -> Result<f64> {
    // The series needs roughly sqrt(s) extra terms for large shapes.
    let cap = MAX_ITER + (10.0 * s.sqrt()) as usize;
    let mut ap = s;
    let mut del = 1.0 / s;
    let mut sum = del;
    for _ in 0..cap {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            let v = sum * (-x + s * x.ln() - ln_gamma_unchecked(s)).exp();
            return Ok(v.clamp(0.0, 1.0));
        }
    }
    Err(Error::NoConvergence {
        func: "reg_inc_gamma",
        iterations: cap,
    })
}

fn gamma_cf(s: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            let v = (-x + s * x.ln() - ln_gamma_unchecked(s)).exp() * h;
            return Ok(v.clamp(0.0, 1.0));
        }
    }
    Err(Error::NoConvergence {
        func: "reg_inc_gamma",
        iterations: MAX_ITER,
    })
}

/// Upper tail of the chi-squared distribution.
pub fn chi2_sf(x: f64, df: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(1.0);
    }
    reg_inc_gamma_upper(df / 2.0, x / 2.0)
}

/// Upper tail of the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> Result<f64> {
    if f <= 0.0 {
        return Ok(1.0);
    }
    if f.is_infinite() {
        return Ok(0.0);
    }
    reg_inc_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0)
}

/// `erfc(x)`, via `Q(1/2, x^2)`.
pub fn erfc(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    // Arguments are always valid here, the unwrap cannot fire.
    let q = reg_inc_gamma_upper(0.5, x * x).unwrap_or(0.0);
    if x > 0.0 {
        q
    } else {
        2.0 - q
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Maclaurin series for erf, independent of the gamma routines.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        while term.abs() > 1e-18 {
            n += 1.0;
            term *= -x * x / n;
            sum += term / (2.0 * n + 1.0);
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    #[test]
    fn log_gamma_known_values() {
        assert_eq!(log_gamma(1.0).unwrap(), 0.0);
        let ln_sqrt_pi = 0.5 * std::f64::consts::PI.ln();
        assert!((log_gamma(0.5).unwrap() - ln_sqrt_pi).abs() < 1e-12);
        assert!((log_gamma(0.5).unwrap() - 0.572_364_942_9).abs() < 1e-10);
        let ln_9_fact = (362_880.0f64).ln();
        assert!((log_gamma(10.0).unwrap() - ln_9_fact).abs() < 1e-11);
        assert!((log_gamma(10.0).unwrap() - 12.801_827_480_1).abs() < 1e-9);
    }

    #[test]
    fn log_gamma_extremes() {
        // ln Γ(1e-3) ≈ -ln(1e-3) - γ·1e-3
        let x: f64 = 1e-3;
        let approx = -x.ln() - 0.577_215_664_901_532_9 * x;
        assert!((log_gamma(x).unwrap() - approx).abs() < 1e-6);
        // Stirling at 1e6
        let x = 1e6f64;
        let stirling =
            (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x);
        let got = log_gamma(x).unwrap();
        assert!(((got - stirling) / stirling).abs() < 1e-10);
    }

    #[test]
    fn log_gamma_rejects_nonpositive() {
        assert!(matches!(log_gamma(0.0), Err(Error::Domain { .. })));
        assert!(log_gamma(-2.5).is_err());
        assert!(log_gamma(f64::NAN).is_err());
    }

    #[test]
    fn log_gamma_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(1e-3..200.0);
            let lhs = log_gamma(x + 1.0).unwrap();
            let rhs = log_gamma(x).unwrap() + x.ln();
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "x = {x}");
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2).unwrap(), 6.0);
        assert_eq!(binomial(10, 0).unwrap(), 1.0);
        assert_eq!(binomial(20, 10).unwrap(), 184_756.0);
        assert!((log_binomial(20, 10).unwrap() - 184_756.0f64.ln()).abs() < 1e-10);
        assert!(binomial(3, 4).is_err());
    }

    #[test]
    fn inc_beta_basic_values() {
        assert_eq!(reg_inc_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(reg_inc_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
        assert!((reg_inc_beta(0.5, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        assert!((reg_inc_beta(0.5, 2.0, 2.0).unwrap() - 0.5).abs() < 1e-14);
        // I_x(2, 3) = 6x^2 - 8x^3 + 3x^4
        let x: f64 = 0.3;
        let exact = 6.0 * x.powi(2) - 8.0 * x.powi(3) + 3.0 * x.powi(4);
        assert!((reg_inc_beta(x, 2.0, 3.0).unwrap() - exact).abs() < 1e-13);
    }

    #[test]
    fn inc_beta_domain_errors() {
        assert!(reg_inc_beta(-0.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(1.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 0.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 1.0, -1.0).is_err());
    }

    #[test]
    fn inc_beta_monotone_in_x() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let a: f64 = rng.random_range(0.1..30.0);
            let b: f64 = rng.random_range(0.1..30.0);
            let mut prev = 0.0;
            for i in 0..=40 {
                let v = reg_inc_beta(i as f64 / 40.0, a, b).unwrap();
                assert!(v + 1e-13 >= prev, "a = {a}, b = {b}, i = {i}");
                prev = v;
            }
        }
    }

    proptest! {
        #[test]
        fn inc_beta_reflection(x in 0.0f64..=1.0, a in 0.05f64..50.0, b in 0.05f64..50.0) {
            let lhs = reg_inc_beta(x, a, b).unwrap() + reg_inc_beta(1.0 - x, b, a).unwrap();
            prop_assert!((lhs - 1.0).abs() < 1e-12);
        }

        #[test]
        fn gamma_tails_complement(s in 0.05f64..60.0, x in 0.0f64..150.0) {
            let p = reg_inc_gamma_lower(s, x).unwrap();
            let q = reg_inc_gamma_upper(s, x).unwrap();
            prop_assert!((p + q - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inc_gamma_values() {
        assert_eq!(reg_inc_gamma_lower(1.0, 0.0).unwrap(), 0.0);
        assert!((reg_inc_gamma_lower(0.5, 1e4).unwrap() - 1.0).abs() < 1e-12);
        // P(1/2, 1) = erf(1)
        let erf1 = erf_series(1.0);
        assert!((erf1 - 0.842_700_792_9).abs() < 1e-10);
        assert!((reg_inc_gamma_lower(0.5, 1.0).unwrap() - erf1).abs() < 1e-12);
        // P(1, x) = 1 - e^{-x}
        let want = 1.0 - (-1.0f64).exp();
        assert!((reg_inc_gamma_lower(1.0, 1.0).unwrap() - want).abs() < 1e-14);
        assert!(reg_inc_gamma_lower(0.0, 1.0).is_err());
        assert!(reg_inc_gamma_lower(1.0, -1.0).is_err());
    }

    #[test]
    fn erf_against_series() {
        for i in -30..=30 {
            let x = i as f64 / 10.0;
            assert!((1.0 - erfc(x) - erf_series(x)).abs() < 1e-12, "x = {x}");
        }
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
    }

    #[test]
    fn distribution_tails() {
        // chi-squared with 2 dof: sf = exp(-x/2)
        assert!((chi2_sf(3.0, 2.0).unwrap() - (-1.5f64).exp()).abs() < 1e-14);
        // F(1, d2) at f equals two-sided t tail; F(2, 2): sf = 1/(1+f)
        assert!((f_sf(3.0, 2.0, 2.0).unwrap() - 0.25).abs() < 1e-13);
        assert_eq!(f_sf(0.0, 4.0, 190.0).unwrap(), 1.0);
    }

    #[test]
    fn interval_mass() {
        let seg = RealInterval::new(0.25, 0.5).unwrap();
        assert!((seg.beta_mass(1.0, 1.0).unwrap() - 0.25).abs() < 1e-14);
        assert!(RealInterval::new(0.6, 0.5).is_err());
        assert!(RealInterval::new(-0.1, 0.5).is_err());
    }
}
