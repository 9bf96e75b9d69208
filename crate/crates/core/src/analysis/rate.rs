use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::mixture::{build_mixture, hypoexp_weights, CompensatedSum, SourceSpec};
use crate::special_fn::{digamma_int, exp_integral_e1_scaled, upper_incomplete_gamma_int_scaled, EULER_GAMMA};

use super::config::{FeedbackConfig, SystemConfig};
use super::pair::{check_distinct, PairAnalysis};

/// `E[ln(1 + X)]` for `X ~ Gamma(t, theta)`.
///
/// Uses `sum_{j<t} mu^j e^mu Gamma(-j, mu)` with `mu = 1/theta`; every term is
/// positive, so there is no cancellation for large `t` or small `theta`.
pub fn z_term(t: u32, theta: f64) -> Result<f64> {
    if t < 1 {
        return Err(Error::Domain {
            function: "z_term",
            detail: "shape must be >= 1".into(),
        });
    }
    if !(theta > 0.0) || theta.is_nan() {
        return Err(Error::Domain {
            function: "z_term",
            detail: format!("scale must be positive, got {theta}"),
        });
    }
    if theta.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let mu = 1.0 / theta;
    let mut acc = CompensatedSum::default();
    for j in 0..t {
        acc.add(upper_incomplete_gamma_int_scaled(-(j as i32), mu)?);
    }
    Ok(acc.value())
}

/// `E[ln X]` for `X ~ Gamma(t, theta)`.
fn log_moment(t: u32, theta: f64) -> Result<f64> {
    Ok(digamma_int(t)? + theta.ln())
}

/// Ergodic rate of any stream of pair `k`, bits/s/Hz.
pub fn ergodic_rate(sys: &SystemConfig, fb: &FeedbackConfig, k: usize) -> Result<f64> {
    PairAnalysis::new(sys, fb, k)?.rate()
}

/// Ergodic rate via hypoexponential weights; every pair must carry one stream.
pub fn ergodic_rate_single_stream(sys: &SystemConfig, fb: &FeedbackConfig, k: usize) -> Result<f64> {
    let rates = PairAnalysis::single_stream_rates(sys, fb, k)?;
    let kappa = sys.kappa(k, k);
    if rates.is_empty() {
        return Ok(exp_integral_e1_scaled(1.0 / kappa)? / LN_2);
    }
    let mut with_signal = rates.clone();
    with_signal.push(1.0 / kappa);
    check_distinct(&with_signal)?;
    let w = |r: &[f64]| -> Result<f64> {
        let mut acc = CompensatedSum::default();
        for (wi, &l) in hypoexp_weights(r).iter().zip(r) {
            acc.add(wi * exp_integral_e1_scaled(l)?);
        }
        Ok(acc.value())
    };
    Ok((w(&with_signal)? - w(&rates)?) / LN_2)
}

/// Rate with perfect CSI: `e^{1/kappa} E1(1/kappa) / ln 2`.
pub fn ergodic_rate_perfect(sys: &SystemConfig, k: usize) -> Result<f64> {
    sys.validate()?;
    sys.check_pair(k)?;
    Ok(exp_integral_e1_scaled(1.0 / sys.kappa(k, k))? / LN_2)
}

/// High-SNR limit of the ergodic rate at fixed feedback accuracy. Infinite
/// when no residual interference is left.
pub fn rate_ceiling(sys: &SystemConfig, fb: &FeedbackConfig, k: usize) -> Result<f64> {
    PairAnalysis::new(sys, fb, k)?.rate_ceiling(sys)
}

pub fn rate_loss(sys: &SystemConfig, fb: &FeedbackConfig, k: usize) -> Result<f64> {
    Ok(ergodic_rate_perfect(sys, k)? - ergodic_rate(sys, fb, k)?)
}

/// High-SNR asymptote of the perfect-CSI rate, `(ln kappa - C) / ln 2`.
pub fn rate_perfect_high(sys: &SystemConfig, k: usize) -> Result<f64> {
    sys.validate()?;
    sys.check_pair(k)?;
    Ok((sys.kappa(k, k).ln() - EULER_GAMMA) / LN_2)
}

/// High-SNR rate loss: perfect-CSI asymptote minus the ceiling. Grows like
/// `log2(SNR)`.
pub fn rate_loss_high(sys: &SystemConfig, fb: &FeedbackConfig, k: usize) -> Result<f64> {
    Ok(rate_perfect_high(sys, k)? - rate_ceiling(sys, fb, k)?)
}

/// Rate ceiling for a common, large bit count `B` on every link:
/// `B/(NtNr-1)` plus a constant fixed by the path losses.
pub fn rate_high_largeb(sys: &SystemConfig, fb: &FeedbackConfig, k: usize) -> Result<f64> {
    let pa = PairAnalysis::new(sys, fb, k)?;
    let b = fb.uniform_bits().ok_or_else(|| {
        Error::NonUniformBits("large-B asymptote needs the same finite bit count on every link".into())
    })?;
    let mut shapes = Vec::new();
    let mut scales = Vec::new();
    for i in 0..sys.k {
        let shape = if i == k { sys.d[k] - 1 } else { sys.d[i] };
        if shape > 0 {
            shapes.push(shape);
            scales.push(pa.param.gamma_scale(shape, sys.alpha[k][i] / sys.d[i] as f64));
        }
    }
    let mix = build_mixture(&SourceSpec::new(&shapes, &scales)?)?;
    let log_i = mix.try_expectation(log_moment)?;
    let log_s = (sys.alpha[k][k] / sys.d[k] as f64).ln() - EULER_GAMMA;
    Ok(b as f64 / sys.feedback_dim() as f64 + (log_s - log_i) / LN_2)
}

/// Rate loss for common large `B`: grows by one bit per SNR doubling and
/// shrinks by one bit per `NtNr - 1` extra feedback bits.
pub fn rate_loss_high_largeb(sys: &SystemConfig, fb: &FeedbackConfig, k: usize) -> Result<f64> {
    Ok(rate_perfect_high(sys, k)? - rate_high_largeb(sys, fb, k)?)
}

impl PairAnalysis {
    pub fn rate(&self) -> Result<f64> {
        if self.interference_free() {
            return Ok(exp_integral_e1_scaled(1.0 / self.kappa)? / LN_2);
        }
        let w1 = self.signal_plus_interference.try_expectation(z_term)?;
        let w2 = self.interference.try_expectation(z_term)?;
        Ok((w1 - w2) / LN_2)
    }

    pub fn rate_ceiling(&self, sys: &SystemConfig) -> Result<f64> {
        if self.interference_free() {
            return Ok(f64::INFINITY);
        }
        let w1 = self.signal_plus_interference_unit(sys)?.try_expectation(log_moment)?;
        let w2 = self.interference_unit()?.try_expectation(log_moment)?;
        Ok((w1 - w2) / LN_2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::config::Bits;
    use crate::quadrature::{integrate, Tolerance};

    /// `E[ln(1+X)]` by quadrature after mapping `[0, inf)` onto `[0, 1)`.
    fn z_oracle(t: u32, theta: f64) -> f64 {
        let lnfact: f64 = (1..t).map(|j| (j as f64).ln()).sum();
        let f = |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let x = theta * u / (1.0 - u);
            let jac = theta / ((1.0 - u) * (1.0 - u));
            let y = x / theta;
            let dens = ((t as f64 - 1.0) * y.ln() - y - lnfact).exp() / theta;
            (1.0 + x).ln() * dens * jac
        };
        integrate(f, 0.0, 1.0, Tolerance { abs: 1e-13, rel: 1e-12, max_intervals: 4000 }).unwrap().value
    }

    #[test]
    fn z_term_reference_values() {
        assert!((z_term(1, 1.0).unwrap() - 0.596_347_362_323_194_6).abs() < 1e-13);
        assert!((z_term(2, 1.0).unwrap() - 1.0).abs() < 1e-13);
        assert!(z_term(1, 1e-9).unwrap() < 2e-9);
        assert!(z_term(0, 1.0).is_err());
        assert!(z_term(1, -1.0).is_err());
        for t in 1..=6 {
            for theta in [1e-3, 0.05, 0.7, 1.0, 3.0, 40.0, 1e4] {
                let z = z_term(t, theta).unwrap();
                let o = z_oracle(t, theta);
                assert!((z - o).abs() < 1e-9 * o.max(1e-3), "t={t} theta={theta}: {z} vs {o}");
            }
        }
    }

    #[test]
    fn perfect_rate_matches_quadrature() {
        let sys = SystemConfig::table1(10.0);
        let r = ergodic_rate_perfect(&sys, 0).unwrap();
        assert!((r - z_oracle(1, 10.0) / LN_2).abs() < 1e-10);
    }

    #[test]
    fn generic_matches_single_stream() {
        for snr_db in [-10.0, 0.0, 10.0, 20.0, 30.0] {
            for b in [0, 3, 8, 15] {
                let sys = SystemConfig::table1(snr_db);
                let fb = FeedbackConfig::uniform(3, Bits::Finite(b));
                for k in 0..3 {
                    let a = ergodic_rate(&sys, &fb, k).unwrap();
                    let s = ergodic_rate_single_stream(&sys, &fb, k).unwrap();
                    assert!((a - s).abs() < 1e-9, "{snr_db} {b} {k}: {a} {s}");
                }
            }
        }
    }

    #[test]
    fn rate_limits() {
        let fb = FeedbackConfig::uniform(3, Bits::Finite(6));
        let ceil = rate_ceiling(&SystemConfig::table1(10.0), &fb, 0).unwrap();
        let ceil2 = rate_ceiling(&SystemConfig::table1(40.0), &fb, 0).unwrap();
        assert!((ceil - ceil2).abs() < 1e-12);
        let hi = ergodic_rate(&SystemConfig::table1(80.0), &fb, 0).unwrap();
        assert!((hi - ceil).abs() < 1e-4);
        let mut prev = 0.0;
        for b in 0..25 {
            let fb = FeedbackConfig::uniform(3, Bits::Finite(b));
            let r = ergodic_rate(&SystemConfig::table1(20.0), &fb, 0).unwrap();
            assert!(r >= prev - 1e-12);
            prev = r;
        }
        let sys = SystemConfig::table1(100.0);
        let gap = ergodic_rate_perfect(&sys, 0).unwrap() - rate_perfect_high(&sys, 0).unwrap();
        assert!(gap.abs() < 1e-8);
    }

    #[test]
    fn vanishing_interference_gives_perfect_rate() {
        let sys = SystemConfig::new(4, 2, vec![1, 1], vec![vec![1.0, 0.3], vec![0.3, 1.0]], 10.0, 1.0).unwrap();
        let fb = FeedbackConfig::uniform(2, Bits::Finite(300));
        let r = ergodic_rate_single_stream(&sys, &fb, 0).unwrap();
        assert!((r - ergodic_rate_perfect(&sys, 0).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn large_b_slope_and_agreement() {
        let sys = SystemConfig::table1(60.0);
        let r30 = rate_high_largeb(&sys, &FeedbackConfig::uniform(3, Bits::Finite(30)), 0).unwrap();
        let r37 = rate_high_largeb(&sys, &FeedbackConfig::uniform(3, Bits::Finite(37)), 0).unwrap();
        assert!((r37 - r30 - 1.0).abs() < 1e-12);
        let fb = FeedbackConfig::uniform(3, Bits::Finite(40));
        let exact = ergodic_rate(&sys, &fb, 0).unwrap();
        assert!((rate_high_largeb(&sys, &fb, 0).unwrap() - exact).abs() < 0.1);
        let l1 = rate_loss_high_largeb(&SystemConfig::table1(40.0), &fb, 0).unwrap();
        let l2 = rate_loss_high_largeb(&SystemConfig::table1(40.0 + 10.0 * 2f64.log10()), &fb, 0).unwrap();
        assert!((l2 - l1 - 1.0).abs() < 1e-12);
        let mut fb = fb;
        fb.bits[0][1] = Bits::Finite(3);
        assert!(matches!(rate_high_largeb(&sys, &fb, 0), Err(Error::NonUniformBits(_))));
    }
}
