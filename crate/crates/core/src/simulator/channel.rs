use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analysis::{Bits, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq, CMat};
use crate::special_fn::{gamma_int_quantile, gamma_p_int, gamma_q_int};

/// Largest codebook exponent the RVQ quantizer accepts.
pub const RVQ_MAX_BITS: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantMode {
    /// Gamma quantization-cell model of the CSI error.
    #[default]
    ErrorModel,
    /// Random vector quantization with an actual codebook.
    Rvq,
}

/// Small-scale fading of every link; `h[k][i]` is `nr x nt`, transmitter `i`
/// to receiver `k`. Path loss is applied elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: Vec<Vec<CMat>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedCsi {
    /// Unit-norm quantized direction of the vectorized channel.
    pub hhat: Vec<C64>,
    /// `1 - |<h/|h|, hhat>|^2`.
    pub rho_actual: f64,
    pub mode: QuantMode,
}

pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub(crate) fn complex_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    (0..n).map(|_| complex_normal(rng)).collect()
}

/// Draws i.i.d. `CN(0, 1)` entries for every link.
pub fn sample_channels<R: Rng + ?Sized>(sys: &SystemConfig, rng: &mut R) -> ChannelRealization {
    let h = (0..sys.k)
        .map(|_| {
            (0..sys.k)
                .map(|_| CMat::from_col_major(sys.nr, sys.nt, complex_normal_vec(sys.nr * sys.nt, rng)))
                .collect()
        })
        .collect();
    ChannelRealization { h }
}

/// Unit vector uniform on the orthogonal complement of the unit vector `u`.
pub(crate) fn uniform_complement<R: Rng + ?Sized>(u: &[C64], rng: &mut R) -> Vec<C64> {
    loop {
        let mut z = complex_normal_vec(u.len(), rng);
        let proj = dot(u, &z);
        for (x, y) in z.iter_mut().zip(u) {
            *x -= proj * y;
        }
        let n = norm_sq(&z).sqrt();
        if n > 1e-8 {
            z.iter_mut().for_each(|x| *x /= n);
            return z;
        }
    }
}

/// Gamma-model error parts of one link that do not depend on the bit count.
#[derive(Debug, Clone)]
pub(crate) struct ErrorParts {
    pub direction: Vec<C64>,
    pub norm_sq: f64,
    pub error_dir: Vec<C64>,
    /// `rho |h|^2 / delta`, a `Gamma(n - 1, 1)` draw coupled to `|h|^2`.
    pub unit_error: f64,
}

impl ErrorParts {
    pub fn draw<R: Rng + ?Sized>(h: &[C64], rng: &mut R) -> Self {
        let n = h.len() as u32;
        let norm_sq = norm_sq(h);
        let norm = norm_sq.sqrt();
        let direction: Vec<C64> = h.iter().map(|z| z / norm).collect();
        let error_dir = uniform_complement(&direction, rng);
        // Monotone coupling of Gamma(n) and Gamma(n - 1) keeps the error
        // below the channel power; the smaller tail is inverted for accuracy.
        let unit_error = if norm_sq < n as f64 - 1.0 {
            gamma_int_quantile(n - 1, gamma_p_int(n, norm_sq), false)
        } else {
            gamma_int_quantile(n - 1, gamma_q_int(n, norm_sq), true)
        };
        ErrorParts {
            direction,
            norm_sq,
            error_dir,
            unit_error: unit_error.min(norm_sq),
        }
    }

    pub fn quantize(&self, bits: Bits) -> QuantizedCsi {
        let n = self.direction.len() as u32;
        let delta = bits.accuracy(n - 1);
        let rho = (delta * self.unit_error / self.norm_sq).min(1.0);
        if rho == 0.0 {
            return QuantizedCsi {
                hhat: self.direction.clone(),
                rho_actual: 0.0,
                mode: QuantMode::ErrorModel,
            };
        }
        let (a, b) = ((1.0 - rho).sqrt(), rho.sqrt());
        let hhat = self
            .direction
            .iter()
            .zip(&self.error_dir)
            .map(|(h, e)| h * a - e * b)
            .collect();
        QuantizedCsi {
            hhat,
            rho_actual: rho,
            mode: QuantMode::ErrorModel,
        }
    }
}

/// Quantization-cell error model: `rho |h|^2 ~ Gamma(n - 1, 2^{-B/(n-1)})`
/// with the error direction uniform on the complement of the quantized one.
pub fn error_model_quantize<R: Rng + ?Sized>(h: &[C64], bits: Bits, rng: &mut R) -> Result<QuantizedCsi> {
    check_vector(h)?;
    Ok(ErrorParts::draw(h, rng).quantize(bits))
}

fn check_vector(h: &[C64]) -> Result<()> {
    if h.len() < 2 {
        return Err(Error::Config("channel vector needs at least two entries".into()));
    }
    let n = norm_sq(h);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Config("channel vector must be nonzero and finite".into()));
    }
    Ok(())
}

/// Random codebook of `2^bits` unit vectors.
#[derive(Debug, Clone)]
pub(crate) struct Codebook {
    words: Vec<Vec<C64>>,
}

impl Codebook {
    pub fn generate<R: Rng + ?Sized>(n: usize, bits: u32, rng: &mut R) -> Self {
        let words = (0..1usize << bits)
            .map(|_| {
                let mut c = complex_normal_vec(n, rng);
                crate::linalg::normalize(&mut c);
                c
            })
            .collect();
        Codebook { words }
    }

    pub fn quantize(&self, h: &[C64]) -> QuantizedCsi {
        let norm = norm_sq(h).sqrt();
        let mut best = (f64::NEG_INFINITY, 0);
        for (idx, c) in self.words.iter().enumerate() {
            let corr = dot(c, h).norm_sqr();
            if corr > best.0 {
                best = (corr, idx);
            }
        }
        QuantizedCsi {
            hhat: self.words[best.1].clone(),
            rho_actual: (1.0 - best.0 / (norm * norm)).clamp(0.0, 1.0),
            mode: QuantMode::Rvq,
        }
    }
}

/// Picks the codeword best aligned with `h` from `2^bits` unit vectors drawn
/// from `codebook_rng`. Pass a generator in the same state to reuse a
/// codebook.
pub fn rvq_quantize<R: Rng + ?Sized>(h: &[C64], bits: Bits, codebook_rng: &mut R) -> Result<QuantizedCsi> {
    check_vector(h)?;
    let bits = match bits {
        Bits::Infinite => {
            let norm = norm_sq(h).sqrt();
            return Ok(QuantizedCsi {
                hhat: h.iter().map(|z| z / norm).collect(),
                rho_actual: 0.0,
                mode: QuantMode::Rvq,
            });
        }
        Bits::Finite(b) if b > RVQ_MAX_BITS => {
            return Err(Error::BudgetExceeded {
                bits: b,
                cap: RVQ_MAX_BITS,
            })
        }
        Bits::Finite(b) => b,
    };
    let norm = norm_sq(h).sqrt();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for _ in 0..1u64 << bits {
        let mut c = complex_normal_vec(h.len(), codebook_rng);
        crate::linalg::normalize(&mut c);
        let corr = dot(&c, h).norm_sqr();
        if corr > best.0 {
            best = (corr, c);
        }
    }
    Ok(QuantizedCsi {
        hhat: best.1,
        rho_actual: (1.0 - best.0 / (norm * norm)).clamp(0.0, 1.0),
        mode: QuantMode::Rvq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::CompensatedSum;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn channel_statistics() {
        let sys = SystemConfig::table1(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut entry = CompensatedSum::default();
        let mut count = 0usize;
        let mut norms = Vec::new();
        for _ in 0..12_000 {
            let ch = sample_channels(&sys, &mut rng);
            for z in ch.h[0][1].as_slice() {
                entry.add(z.norm_sqr());
                count += 1;
            }
            norms.push(ch.h[2][0].frobenius_sq());
        }
        assert!((entry.value() / count as f64 - 1.0).abs() < 0.02);
        let mean = norms.iter().sum::<f64>() / norms.len() as f64;
        let se = (8.0 / norms.len() as f64).sqrt();
        assert!((mean - 8.0).abs() < 3.0 * se);
        let a = sample_channels(&sys, &mut ChaCha8Rng::seed_from_u64(7));
        let b = sample_channels(&sys, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }

    #[test]
    fn error_model_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 8;
        let b = 6;
        let delta = (-(b as f64) / 7.0).exp2();
        let mut samples = Vec::new();
        for _ in 0..100_000 {
            let h = complex_normal_vec(n, &mut rng);
            let q = error_model_quantize(&h, Bits::Finite(b), &mut rng).unwrap();
            assert!((norm_sq(&q.hhat) - 1.0).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&q.rho_actual));
            let proj = dot(&q.hhat, &h).norm_sqr() / norm_sq(&h);
            assert!((1.0 - proj - q.rho_actual).abs() < 1e-9);
            samples.push(q.rho_actual * norm_sq(&h));
        }
        let m = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        let se = (var / samples.len() as f64).sqrt();
        assert!((m - 7.0 * delta).abs() < 3.0 * se, "{m} vs {}", 7.0 * delta);
        let h = complex_normal_vec(n, &mut rng);
        let q = error_model_quantize(&h, Bits::Infinite, &mut rng).unwrap();
        assert_eq!(q.rho_actual, 0.0);
        let norm = norm_sq(&h).sqrt();
        for (a, b) in q.hhat.iter().zip(&h) {
            assert!((a - b / norm).norm() < 1e-15);
        }
    }

    #[test]
    fn rvq_behaviour() {
        let n = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut zero = 0.0;
        for _ in 0..10_000 {
            let h = complex_normal_vec(n, &mut rng);
            zero += rvq_quantize(&h, Bits::Finite(0), &mut rng).unwrap().rho_actual;
        }
        let zero = zero / 10_000.0;
        assert!((zero - (1.0 - 1.0 / n as f64)).abs() < 0.01, "{zero}");
        let mut prev = 1.0;
        for b in [4u32, 8, 12] {
            let book = Codebook::generate(n, b, &mut ChaCha8Rng::seed_from_u64(b as u64));
            let trials = 2000;
            let mean = (0..trials)
                .map(|_| book.quantize(&complex_normal_vec(n, &mut rng)).rho_actual)
                .sum::<f64>()
                / trials as f64;
            let approx = (-(b as f64) / 7.0).exp2();
            assert!((mean / approx - 1.0).abs() < 0.15, "B={b}: {mean} vs {approx}");
            assert!(mean < prev);
            prev = mean;
        }
        let h = complex_normal_vec(n, &mut rng);
        assert!(matches!(
            rvq_quantize(&h, Bits::Finite(25), &mut rng),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
