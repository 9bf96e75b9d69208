use crate::error::Result;
use crate::mixture::{hypoexp_weights, CompensatedSum, ErlangMixture};

use super::config::{FeedbackConfig, SystemConfig};
use super::pair::PairAnalysis;

/// `P(S <= gamma (1 + I))` with `S ~ kappa Exp(1)`: `1 - e^{-g/kappa} E[e^{-g I/kappa}]`.
fn outage_from_mixture(mix: &ErlangMixture, kappa: f64, gamma_th: f64) -> f64 {
    let x = gamma_th / kappa;
    let laplace = mix.expectation(|t, theta| (1.0 + theta * x).powi(-(t as i32)));
    1.0 - (-x).exp() * laplace
}

/// Outage probability of any stream of pair `k` at linear threshold `gamma_th`.
pub fn outage_probability(sys: &SystemConfig, fb: &FeedbackConfig, k: usize, gamma_th: f64) -> Result<f64> {
    let pa = PairAnalysis::new(sys, fb, k)?;
    Ok(pa.outage(gamma_th))
}

/// Outage via the hypoexponential law; every pair must carry one stream.
pub fn outage_single_stream(sys: &SystemConfig, fb: &FeedbackConfig, k: usize, gamma_th: f64) -> Result<f64> {
    let rates = PairAnalysis::single_stream_rates(sys, fb, k)?;
    let kappa = sys.kappa(k, k);
    let x = gamma_th / kappa;
    if rates.is_empty() {
        return Ok(-(-x).exp_m1());
    }
    let laplace: CompensatedSum = hypoexp_weights(&rates)
        .iter()
        .zip(&rates)
        .map(|(w, &l)| w * l / (l + x))
        .collect();
    Ok(1.0 - (-x).exp() * laplace.value())
}

/// Outage with perfect CSI: `1 - exp(-gamma_th / kappa_{k,k})`.
pub fn outage_perfect(sys: &SystemConfig, k: usize, gamma_th: f64) -> Result<f64> {
    sys.validate()?;
    sys.check_pair(k)?;
    Ok(-(-gamma_th / sys.kappa(k, k)).exp_m1())
}

pub fn outage_loss(sys: &SystemConfig, fb: &FeedbackConfig, k: usize, gamma_th: f64) -> Result<f64> {
    Ok(outage_probability(sys, fb, k, gamma_th)? - outage_perfect(sys, k, gamma_th)?)
}

/// High-SNR limit of the outage probability at fixed feedback accuracy.
pub fn outage_floor(sys: &SystemConfig, fb: &FeedbackConfig, k: usize, gamma_th: f64) -> Result<f64> {
    PairAnalysis::new(sys, fb, k)?.outage_floor(sys, gamma_th)
}

impl PairAnalysis {
    pub fn outage(&self, gamma_th: f64) -> f64 {
        if self.interference_free() {
            return -(-gamma_th / self.kappa).exp_m1();
        }
        outage_from_mixture(&self.interference, self.kappa, gamma_th)
    }

    pub fn outage_floor(&self, sys: &SystemConfig, gamma_th: f64) -> Result<f64> {
        if self.interference_free() {
            return Ok(0.0);
        }
        let mix = self.interference_unit()?;
        let x = gamma_th / self.kappa_unit(sys);
        let laplace = mix.expectation(|t, theta| (1.0 + theta * x).powi(-(t as i32)));
        Ok(1.0 - laplace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::config::Bits;

    fn two_pair(snr_db: f64) -> SystemConfig {
        SystemConfig::new(
            4,
            2,
            vec![1, 1],
            vec![vec![1.0, 0.2], vec![0.3, 1.0]],
            10f64.powf(snr_db / 10.0),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn single_interferer_closed_form() {
        let sys = two_pair(10.0);
        let fb = FeedbackConfig::uniform(2, Bits::Finite(5));
        let g = 1.3;
        let kappa = sys.kappa(0, 0);
        let varrho = fb.varrho(&sys, 0, 1);
        let want = 1.0 - (-g / kappa).exp() / (1.0 + varrho * g / kappa);
        assert!((outage_probability(&sys, &fb, 0, g).unwrap() - want).abs() < 1e-14);
        assert!((outage_single_stream(&sys, &fb, 0, g).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn perfect_values() {
        let sys = SystemConfig::table1(10.0);
        let kappa = sys.kappa(0, 0);
        let v = outage_perfect(&sys, 0, kappa).unwrap();
        assert!((v - (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert!((v - 0.632121).abs() < 1e-6);
        assert_eq!(outage_perfect(&sys, 0, 0.0).unwrap(), 0.0);
        let all_perfect = FeedbackConfig::uniform(3, Bits::Infinite);
        assert_eq!(outage_probability(&sys, &all_perfect, 0, 2.0).unwrap(), outage_perfect(&sys, 0, 2.0).unwrap());
    }

    #[test]
    fn threshold_limits_and_monotonicity() {
        let sys = SystemConfig::table1(10.0);
        let fb = FeedbackConfig::uniform(3, Bits::Finite(6));
        assert!(outage_probability(&sys, &fb, 0, 1e-12).unwrap().abs() < 1e-12);
        assert_eq!(outage_single_stream(&sys, &fb, 0, 0.0).unwrap(), 0.0);
        let mut prev = 0.0;
        for i in 1..40 {
            let p = outage_probability(&sys, &fb, 1, i as f64 * 0.25).unwrap();
            assert!(p >= prev);
            prev = p;
        }
        let mut prev = 1.0;
        for b in 0..30 {
            let fb = FeedbackConfig::uniform(3, Bits::Finite(b));
            let p = outage_probability(&sys, &fb, 0, 1.0).unwrap();
            assert!(p <= prev + 1e-15);
            prev = p;
        }
    }

    #[test]
    fn generic_matches_single_stream() {
        for snr_db in [-10.0, 0.0, 10.0, 20.0, 30.0] {
            for b in [0, 3, 8, 15] {
                let sys = SystemConfig::table1(snr_db);
                let fb = FeedbackConfig::uniform(3, Bits::Finite(b));
                for k in 0..3 {
                    let a = outage_probability(&sys, &fb, k, 1.0).unwrap();
                    let s = outage_single_stream(&sys, &fb, k, 1.0).unwrap();
                    assert!((a - s).abs() < 1e-9, "{snr_db} {b} {k}: {a} {s}");
                }
            }
        }
    }

    #[test]
    fn floor_is_snr_free_and_bounds_loss() {
        let fb = FeedbackConfig::uniform(3, Bits::Finite(6));
        let f1 = outage_floor(&SystemConfig::table1(10.0), &fb, 0, 1.0).unwrap();
        let f2 = outage_floor(&SystemConfig::table1(50.0), &fb, 0, 1.0).unwrap();
        assert!((f1 - f2).abs() < 1e-12);
        let l20 = outage_loss(&SystemConfig::table1(20.0), &fb, 0, 1.0).unwrap();
        let l40 = outage_loss(&SystemConfig::table1(40.0), &fb, 0, 1.0).unwrap();
        assert!(l40 >= l20);
        assert!(l40 <= f1 + 1e-12);
        let hi = outage_probability(&SystemConfig::table1(90.0), &fb, 0, 1.0).unwrap();
        assert!((hi - f1).abs() < 1e-7);
        let lo = outage_loss(&SystemConfig::table1(-40.0), &fb, 0, 1.0).unwrap();
        assert!(lo.abs() < 1e-5);
    }

    #[test]
    fn infeasible_is_rejected() {
        let sys = SystemConfig::table1(10.0).with_streams(vec![2, 2, 2]);
        let fb = FeedbackConfig::uniform(3, Bits::Finite(6));
        assert!(matches!(
            outage_probability(&sys, &fb, 0, 1.0),
            Err(crate::error::Error::Infeasible(_))
        ));
        assert!(outage_single_stream(&sys, &fb, 0, 1.0).is_err());
    }
}
