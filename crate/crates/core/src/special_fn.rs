//! Scalar special functions used by the closed-form metrics.
//!
//! Everything here is restricted to real positive arguments and integer
//! orders, which is all the Erlang-mixture expressions ever need. The
//! exponential integral uses the usual two-regime scheme: a power series
//! below `x = 1` and a modified Lentz continued fraction above it.

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_SWITCH: f64 = 1.0;
const CF_MAX_ITER: usize = 10_000;
const CF_TINY: f64 = 1e-300;

fn check_positive(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            function: name,
            detail: format!("argument must be positive, got {x}"),
        })
    }
}

/// `E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)`, for `0 < x < 1`.
fn e1_series(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -x / kf;
        let contrib = term / kf;
        sum += contrib;
        if contrib.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// Continued fraction for `x^{-a} e^x Gamma(a, x)`, valid for any real `a`
/// and `x >= 1`:
///
/// `1 / (x + 1 - a - 1(1 - a) / (x + 3 - a - 2(2 - a) / (x + 5 - a - ...)))`
fn gamma_cf_scaled(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / CF_TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..CF_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = b + an / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Exponential integral `E1(x) = int_x^inf e^{-t}/t dt`.
///
/// Underflows to zero once `e^{-x}` does (around `x = 745`).
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    check_positive("exp_integral_e1", x)?;
    if x < SERIES_SWITCH {
        Ok(e1_series(x))
    } else {
        Ok((-x).exp() * gamma_cf_scaled(0.0, x))
    }
}

/// `e^x E1(x)`, finite for every positive `x`; behaves like `1/x - 1/x^2`
/// for large arguments.
pub fn exp_integral_e1_scaled(x: f64) -> Result<f64> {
    check_positive("exp_integral_e1_scaled", x)?;
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    if x < SERIES_SWITCH {
        Ok(x.exp() * e1_series(x))
    } else if x < 1e12 {
        Ok(gamma_cf_scaled(0.0, x))
    } else {
        // the fraction needs no more than two terms out here
        let inv = 1.0 / x;
        Ok(inv * (1.0 - inv + 2.0 * inv * inv))
    }
}

/// `x^{-a} e^x Gamma(a, x)` for integer `a <= 1`.
///
/// This is the quantity the SER and ergodic-rate sums actually need; it stays
/// in `(0, 1/x]`-ish range for all positive `x` and never overflows.
pub fn upper_incomplete_gamma_int_scaled(a: i32, x: f64) -> Result<f64> {
    if a > 1 {
        return Err(Error::Domain {
            function: "upper_incomplete_gamma_int_scaled",
            detail: format!("order must be <= 1, got {a}"),
        });
    }
    check_positive("upper_incomplete_gamma_int_scaled", x)?;
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    if a == 1 {
        return Ok(1.0 / x);
    }
    if x >= SERIES_SWITCH {
        return Ok(gamma_cf_scaled(a as f64, x));
    }
    // s_a = (x s_{a+1} - 1) / a, started from s_0 = e^x E1(x)
    let mut s = x.exp() * e1_series(x);
    let mut order = 0;
    while order > a {
        order -= 1;
        s = (x * s - 1.0) / order as f64;
    }
    Ok(s)
}

/// Upper incomplete gamma `Gamma(a, x)` for integer `a <= 1`.
///
/// `a = 1` gives `e^{-x}`, `a = 0` gives `E1(x)`, and negative orders follow
/// the downward recurrence `Gamma(a, x) = (Gamma(a+1, x) - x^a e^{-x}) / a`.
pub fn upper_incomplete_gamma_int(a: i32, x: f64) -> Result<f64> {
    if a > 1 {
        return Err(Error::Domain {
            function: "upper_incomplete_gamma_int",
            detail: format!("order must be <= 1, got {a}"),
        });
    }
    check_positive("upper_incomplete_gamma_int", x)?;
    match a {
        1 => Ok((-x).exp()),
        0 => exp_integral_e1(x),
        _ if x < SERIES_SWITCH => {
            let mut g = e1_series(x);
            let ex = (-x).exp();
            let mut order = 0;
            while order > a {
                order -= 1;
                g = (g - x.powi(order) * ex) / order as f64;
            }
            Ok(g)
        }
        _ => Ok(upper_incomplete_gamma_int_scaled(a, x)? * x.powi(a) * (-x).exp()),
    }
}

/// Digamma at a positive integer, `psi(n) = -C + sum_{m<n} 1/m`.
pub fn digamma_int(n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain {
            function: "digamma_int",
            detail: "argument must be a positive integer".into(),
        });
    }
    let harmonic: f64 = (1..n).map(|m| 1.0 / m as f64).sum();
    Ok(harmonic - EULER_GAMMA)
}

/// `ln(n!)` for small `n`.
pub(crate) fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|m| (m as f64).ln()).sum()
}

/// Regularized upper incomplete gamma `Q(n, x) = e^{-x} sum_{j<n} x^j / j!`
/// for integer `n >= 1`.
pub fn gamma_q_int(n: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..n {
        term *= x / j as f64;
        sum += term;
    }
    // e^{-x} * sum, kept finite when x is large and sum overflows
    if sum.is_finite() {
        (-x).exp() * sum
    } else {
        0.0
    }
}

/// Regularized lower incomplete gamma `P(n, x) = 1 - Q(n, x)` for integer
/// `n >= 1`, evaluated by the series when it is the smaller tail.
pub fn gamma_p_int(n: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < n as f64 {
        // P(n, x) = e^{-x} x^n / n! * sum_{j>=0} x^j n! / (n+j)!
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut j = 1.0;
        while term > 1e-17 * sum {
            term *= x / (n as f64 + j);
            sum += term;
            j += 1.0;
        }
        let log_lead = -x + n as f64 * x.ln() - ln_factorial(n);
        (log_lead.exp() * sum).min(1.0)
    } else {
        1.0 - gamma_q_int(n, x)
    }
}

/// Quantile of `Gamma(n, 1)` for integer shape, given either tail.
///
/// `upper = true` means `prob` is `Q(n, x)`; otherwise it is `P(n, x)`.
/// Solved by safeguarded Newton iteration on whichever tail is passed in so
/// that extreme probabilities keep their relative accuracy.
pub fn gamma_int_quantile(n: u32, prob: f64, upper: bool) -> f64 {
    if prob <= 0.0 {
        return if upper { f64::INFINITY } else { 0.0 };
    }
    if prob >= 1.0 {
        return if upper { 0.0 } else { f64::INFINITY };
    }
    let tail = |x: f64| if upper { gamma_q_int(n, x) } else { gamma_p_int(n, x) };
    // bracket
    let mut lo = 0.0;
    let mut hi = (n as f64).max(1.0);
    while (upper && tail(hi) > prob) || (!upper && tail(hi) < prob) {
        lo = hi;
        hi *= 2.0;
    }
    let log_norm = ln_factorial(n - 1);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = tail(x) - prob;
        let increasing = !upper;
        if (f > 0.0) == increasing {
            hi = x;
        } else {
            lo = x;
        }
        let pdf = ((n as f64 - 1.0) * x.ln() - x - log_norm).exp();
        let step = if upper { -f / pdf } else { f / pdf };
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs() || hi - lo <= 1e-15 * hi {
            return next;
        }
        x = next;
    }
    x
}
