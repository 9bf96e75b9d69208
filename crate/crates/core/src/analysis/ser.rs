use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::mixture::{hypoexp_weights, CompensatedSum, ErlangMixture};
use crate::quadrature::{gauss_legendre_64, integrate, Tolerance};
use crate::special_fn::upper_incomplete_gamma_int_scaled;

use super::config::{FeedbackConfig, Modulation, ModulationFamily, SystemConfig};
use super::pair::PairAnalysis;

/// `sum_pieces pref * int kernel(g / sin^2 x) dx`.
fn angle_average<F: Fn(f64) -> f64>(modulation: &Modulation, kernel: F) -> Result<f64> {
    modulation.validate()?;
    let g = modulation.g();
    let mut total = 0.0;
    for piece in modulation.pieces() {
        let f = |x: f64| {
            let s2 = x.sin().powi(2);
            if s2 == 0.0 {
                return kernel(f64::INFINITY);
            }
            kernel(g / s2)
        };
        let r = integrate(f, piece.lo, piece.hi, Tolerance::default())?;
        if !r.value.is_finite() {
            return Err(Error::Quadrature {
                value: r.value,
                error: r.error,
            });
        }
        total += piece.prefactor * r.value;
    }
    Ok(total)
}

/// `E[1 / (a + I)]` for `I` drawn from the mixture.
fn inverse_moment(mix: &ErlangMixture, a: f64) -> f64 {
    mix.expectation(|t, theta| {
        let u = a / theta;
        upper_incomplete_gamma_int_scaled(1 - t as i32, u).map_or(f64::NAN, |s| u * s / a)
    })
}

/// `E[(c + I) / (c + I + b kappa)] = 1 - b kappa E[1 / (c + b kappa + I)]`.
fn imperfect_kernel(mix: &ErlangMixture, kappa: f64, c: f64, b: f64) -> f64 {
    if b.is_infinite() {
        return 0.0;
    }
    let bk = b * kappa;
    1.0 - bk * inverse_moment(mix, c + bk)
}

/// SER of one stream of pair `k` averaged over fading and CSI error.
pub fn ser_average(sys: &SystemConfig, fb: &FeedbackConfig, k: usize, modulation: &Modulation) -> Result<f64> {
    PairAnalysis::new(sys, fb, k)?.ser(modulation)
}

/// SER via the hypoexponential law; every pair must carry one stream.
pub fn ser_single_stream(sys: &SystemConfig, fb: &FeedbackConfig, k: usize, modulation: &Modulation) -> Result<f64> {
    let rates = PairAnalysis::single_stream_rates(sys, fb, k)?;
    let kappa = sys.kappa(k, k);
    if rates.is_empty() {
        return ser_perfect(sys, k, modulation);
    }
    let weights = hypoexp_weights(&rates);
    angle_average(modulation, |b| {
        if b.is_infinite() {
            return 0.0;
        }
        let bk = b * kappa;
        let a = 1.0 + bk;
        let inv: CompensatedSum = weights
            .iter()
            .zip(&rates)
            .map(|(w, &l)| w * l * upper_incomplete_gamma_int_scaled(0, l * a).unwrap_or(f64::NAN))
            .collect();
        1.0 - bk * inv.value()
    })
}

/// SER with perfect CSI.
pub fn ser_perfect(sys: &SystemConfig, k: usize, modulation: &Modulation) -> Result<f64> {
    sys.validate()?;
    sys.check_pair(k)?;
    let kappa = sys.kappa(k, k);
    angle_average(modulation, |b| if b.is_infinite() { 0.0 } else { 1.0 / (1.0 + b * kappa) })
}

pub fn ser_loss(sys: &SystemConfig, fb: &FeedbackConfig, k: usize, modulation: &Modulation) -> Result<f64> {
    Ok(ser_average(sys, fb, k, modulation)? - ser_perfect(sys, k, modulation)?)
}

/// High-SNR limit of the SER at fixed feedback accuracy.
pub fn ser_floor(sys: &SystemConfig, fb: &FeedbackConfig, k: usize, modulation: &Modulation) -> Result<f64> {
    PairAnalysis::new(sys, fb, k)?.ser_floor(sys, modulation)
}

/// SER at a known SINR `gamma`.
pub fn conditional_ser(modulation: &Modulation, gamma: f64) -> f64 {
    let g = modulation.g();
    let m = modulation.order as f64;
    match modulation.family {
        ModulationFamily::Pam => 2.0 * (m - 1.0) / m * q_function((2.0 * g * gamma).sqrt()),
        ModulationFamily::Qam => {
            let q = q_function((2.0 * g * gamma).sqrt());
            let outer = 4.0 * (1.0 - 1.0 / m.sqrt());
            outer * (q - (1.0 - 1.0 / m.sqrt()) * q * q)
        }
        ModulationFamily::Psk => {
            let hi = (m - 1.0) * PI / m;
            gauss_legendre_64().integrate(|x| (-g * gamma / x.sin().powi(2)).exp(), 0.0, hi) / PI
        }
    }
}

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

impl PairAnalysis {
    pub fn ser(&self, modulation: &Modulation) -> Result<f64> {
        if self.interference_free() {
            let kappa = self.kappa;
            return angle_average(modulation, |b| if b.is_infinite() { 0.0 } else { 1.0 / (1.0 + b * kappa) });
        }
        angle_average(modulation, |b| imperfect_kernel(&self.interference, self.kappa, 1.0, b))
    }

    pub fn ser_floor(&self, sys: &SystemConfig, modulation: &Modulation) -> Result<f64> {
        if self.interference_free() {
            modulation.validate()?;
            return Ok(0.0);
        }
        let mix = self.interference_unit()?;
        let kappa = self.kappa_unit(sys);
        angle_average(modulation, |b| imperfect_kernel(&mix, kappa, 0.0, b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::config::Bits;

    fn mods() -> Vec<Modulation> {
        vec![Modulation::psk(8), Modulation::pam(8), Modulation::qam(8), Modulation::qam(16), Modulation::psk(2)]
    }

    #[test]
    fn conditional_matches_angle_integral() {
        for m in mods() {
            for gamma in [0.0, 0.3, 2.0, 10.0, 50.0, 300.0] {
                let direct = angle_average(&m, |b| if b.is_infinite() { 0.0 } else { (-b * gamma).exp() }).unwrap();
                let c = conditional_ser(&m, gamma);
                assert!((c - direct).abs() < 1e-10 + 1e-8 * direct, "{m} {gamma}: {c} vs {direct}");
            }
        }
    }

    #[test]
    fn perfect_limits() {
        let sys = SystemConfig::table1(10.0);
        let mut tiny = sys.clone();
        tiny.p = 1e-300;
        assert!((ser_perfect(&tiny, 0, &Modulation::psk(8)).unwrap() - 0.875).abs() < 1e-9);
        let huge = SystemConfig::table1(200.0);
        assert!(ser_perfect(&huge, 0, &Modulation::psk(8)).unwrap() < 1e-15);
        let fb = FeedbackConfig::uniform(3, Bits::Infinite);
        for m in mods() {
            let a = ser_average(&sys, &fb, 1, &m).unwrap();
            let p = ser_perfect(&sys, 1, &m).unwrap();
            assert!((a - p).abs() < 1e-10);
        }
    }

    /// Perfect SER against averaging the conditional SER over `kappa Exp(1)`.
    #[test]
    fn perfect_matches_fading_average() {
        let sys = SystemConfig::table1(10.0);
        let kappa = sys.kappa(0, 0);
        for m in mods() {
            let avg = integrate(
                |u: f64| {
                    if u >= 1.0 {
                        return 0.0;
                    }
                    let x = u / (1.0 - u);
                    conditional_ser(&m, kappa * x) * (-x).exp() / ((1.0 - u) * (1.0 - u))
                },
                0.0,
                1.0,
                Tolerance::default(),
            )
            .unwrap()
            .value;
            let p = ser_perfect(&sys, 0, &m).unwrap();
            assert!((p - avg).abs() < 1e-8, "{m}: {p} vs {avg}");
        }
    }

    #[test]
    fn generic_matches_single_stream() {
        for snr_db in [-10.0, 0.0, 10.0, 20.0, 30.0] {
            for b in [0, 3, 8, 15] {
                let sys = SystemConfig::table1(snr_db);
                let fb = FeedbackConfig::uniform(3, Bits::Finite(b));
                for m in [Modulation::psk(8), Modulation::qam(8)] {
                    let a = ser_average(&sys, &fb, 0, &m).unwrap();
                    let s = ser_single_stream(&sys, &fb, 0, &m).unwrap();
                    assert!((a - s).abs() < 1e-8, "{snr_db} {b}: {a} {s}");
                }
            }
        }
    }

    #[test]
    fn floor_and_loss_behaviour() {
        let fb = FeedbackConfig::uniform(3, Bits::Finite(6));
        let m = Modulation::psk(8);
        let floor = ser_floor(&SystemConfig::table1(0.0), &fb, 0, &m).unwrap();
        assert!(floor > 0.0);
        let s80 = ser_average(&SystemConfig::table1(80.0), &fb, 0, &m).unwrap();
        assert!((s80 - floor).abs() < 1e-6);
        let l20 = ser_loss(&SystemConfig::table1(20.0), &fb, 0, &m).unwrap();
        let l40 = ser_loss(&SystemConfig::table1(40.0), &fb, 0, &m).unwrap();
        assert!(l40 >= l20);
        let low = ser_average(&SystemConfig::table1(-120.0), &fb, 0, &Modulation::psk(2)).unwrap();
        assert!((low - 0.5).abs() < 1e-5);
        let mut prev = 1.0;
        for b in 0..20 {
            let fb = FeedbackConfig::uniform(3, Bits::Finite(b));
            let s = ser_average(&SystemConfig::table1(20.0), &fb, 0, &Modulation::qam(8)).unwrap();
            assert!(s <= prev + 1e-12);
            prev = s;
        }
    }
}
