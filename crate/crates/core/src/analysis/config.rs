use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Transceiver geometry, path loss and power budget.
///
/// `alpha[k][i]` is the path loss from transmitter `i` to receiver `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub k: usize,
    pub nt: usize,
    pub nr: usize,
    pub d: Vec<u32>,
    pub alpha: Vec<Vec<f64>>,
    pub p: f64,
    pub sigma2: f64,
}

impl SystemConfig {
    pub fn new(nt: usize, nr: usize, d: Vec<u32>, alpha: Vec<Vec<f64>>, p: f64, sigma2: f64) -> Result<Self> {
        let sys = SystemConfig {
            k: d.len(),
            nt,
            nr,
            d,
            alpha,
            p,
            sigma2,
        };
        sys.validate()?;
        Ok(sys)
    }

    /// The three-pair, 4x2 scenario with the standard path-loss table.
    pub fn table1(snr_db: f64) -> Self {
        SystemConfig {
            k: 3,
            nt: 4,
            nr: 2,
            d: vec![1, 1, 1],
            alpha: vec![
                vec![1.000, 0.050, 0.005],
                vec![0.055, 1.000, 0.045],
                vec![0.004, 0.060, 1.000],
            ],
            p: 10f64.powf(snr_db / 10.0),
            sigma2: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Config(format!("need at least 2 pairs, got {}", self.k)));
        }
        if self.nt < 1 || self.nr < 1 {
            return Err(Error::Config("antenna counts must be >= 1".into()));
        }
        if self.nt * self.nr < 2 {
            return Err(Error::Config("need nt * nr >= 2 for quantized feedback".into()));
        }
        if self.d.len() != self.k {
            return Err(Error::Config(format!("d has {} entries for {} pairs", self.d.len(), self.k)));
        }
        if self.d.iter().any(|&d| d < 1) {
            return Err(Error::Config("every pair needs at least one stream".into()));
        }
        if self.alpha.len() != self.k || self.alpha.iter().any(|row| row.len() != self.k) {
            return Err(Error::Config(format!("alpha must be {k}x{k}", k = self.k)));
        }
        if self.alpha.iter().flatten().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::Config("path losses must be positive and finite".into()));
        }
        if !(self.p > 0.0 && self.p.is_finite()) || !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Config("P and sigma2 must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn check_pair(&self, k: usize) -> Result<()> {
        if k >= self.k {
            return Err(Error::Index(format!("pair {k} of {}", self.k)));
        }
        Ok(())
    }

    /// Transmit SNR `P / sigma2`.
    pub fn snr(&self) -> f64 {
        self.p / self.sigma2
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr().log10()
    }

    /// `P alpha_{k,i} / (d_i sigma2)`.
    pub fn kappa(&self, k: usize, i: usize) -> f64 {
        self.p * self.alpha[k][i] / (self.d[i] as f64 * self.sigma2)
    }

    /// `N_t N_r - 1`, the real dimension count behind the feedback accuracy.
    pub fn feedback_dim(&self) -> u32 {
        (self.nt * self.nr - 1) as u32
    }

    /// Same system at a different transmit SNR (noise power kept).
    pub fn with_snr_db(&self, snr_db: f64) -> Self {
        let mut out = self.clone();
        out.p = self.sigma2 * 10f64.powf(snr_db / 10.0);
        out
    }

    pub fn with_streams(&self, d: Vec<u32>) -> Self {
        let mut out = self.clone();
        out.d = d;
        out
    }
}

/// Feedback bits for one link, or perfect CSI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bits {
    Finite(u32),
    Infinite,
}

impl Bits {
    /// `2^{-B / dim}`, zero for perfect CSI.
    pub fn accuracy(self, dim: u32) -> f64 {
        match self {
            Bits::Finite(b) => (-(b as f64) / dim as f64).exp2(),
            Bits::Infinite => 0.0,
        }
    }

    pub fn finite(self) -> Option<u32> {
        match self {
            Bits::Finite(b) => Some(b),
            Bits::Infinite => None,
        }
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bits::Finite(b) => write!(f, "{b}"),
            Bits::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Bits {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(Bits::Infinite);
        }
        s.parse::<u32>()
            .map(Bits::Finite)
            .map_err(|_| Error::Config(format!("bad bit count {s:?}; expected a nonnegative integer or \"inf\"")))
    }
}

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bits::Finite(b) => s.serialize_u32(*b),
            Bits::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u32),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(b) => Ok(Bits::Finite(b)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Per-link feedback bits; `bits[k][i]` quantizes the channel from
/// transmitter `i` to receiver `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    pub bits: Vec<Vec<Bits>>,
}

impl FeedbackConfig {
    pub fn uniform(k: usize, bits: Bits) -> Self {
        FeedbackConfig {
            bits: vec![vec![bits; k]; k],
        }
    }

    pub fn validate(&self, sys: &SystemConfig) -> Result<()> {
        if self.bits.len() != sys.k || self.bits.iter().any(|r| r.len() != sys.k) {
            return Err(Error::Config(format!("feedback bits must be {k}x{k}", k = sys.k)));
        }
        Ok(())
    }

    /// CSI accuracy `rho_{k,i} = 2^{-B_{k,i}/(N_t N_r - 1)}`.
    pub fn rho(&self, sys: &SystemConfig, k: usize, i: usize) -> f64 {
        self.bits[k][i].accuracy(sys.feedback_dim())
    }

    /// Effective residual scale `kappa_{k,i} rho_{k,i}`.
    pub fn varrho(&self, sys: &SystemConfig, k: usize, i: usize) -> f64 {
        sys.kappa(k, i) * self.rho(sys, k, i)
    }

    pub fn lambda(&self, sys: &SystemConfig, k: usize, i: usize) -> f64 {
        1.0 / self.varrho(sys, k, i)
    }

    /// SNR-free scale `alpha_{k,i} rho_{k,i} / d_i`.
    pub fn xi(&self, sys: &SystemConfig, k: usize, i: usize) -> f64 {
        sys.alpha[k][i] * self.rho(sys, k, i) / sys.d[i] as f64
    }

    /// Common finite bit count, if every link uses the same one.
    pub fn uniform_bits(&self) -> Option<u32> {
        let first = self.bits.first()?.first()?.finite()?;
        self.bits.iter().flatten().all(|b| *b == Bits::Finite(first)).then_some(first)
    }

    pub fn all_perfect(&self) -> bool {
        self.bits.iter().flatten().all(|b| *b == Bits::Infinite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModulationFamily {
    #[serde(alias = "psk")]
    Psk,
    #[serde(alias = "pam")]
    Pam,
    #[serde(alias = "qam")]
    Qam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    pub family: ModulationFamily,
    pub order: u32,
}

/// One piece of the angle integral: `prefactor * int_lo^hi f(x) dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnglePiece {
    pub lo: f64,
    pub hi: f64,
    pub prefactor: f64,
}

impl Modulation {
    pub fn new(family: ModulationFamily, order: u32) -> Result<Self> {
        let m = Modulation { family, order };
        m.validate()?;
        Ok(m)
    }

    pub fn psk(order: u32) -> Self {
        Modulation {
            family: ModulationFamily::Psk,
            order,
        }
    }

    pub fn pam(order: u32) -> Self {
        Modulation {
            family: ModulationFamily::Pam,
            order,
        }
    }

    pub fn qam(order: u32) -> Self {
        Modulation {
            family: ModulationFamily::Qam,
            order,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::Config(format!("modulation order must be >= 2, got {}", self.order)));
        }
        if self.family == ModulationFamily::Qam && !self.order.is_power_of_two() {
            return Err(Error::Config(format!("QAM order must be a power of two, got {}", self.order)));
        }
        Ok(())
    }

    /// The `g` constant multiplying the SINR in the exponent.
    pub fn g(&self) -> f64 {
        let m = self.order as f64;
        match self.family {
            ModulationFamily::Psk => (PI / m).sin().powi(2),
            ModulationFamily::Pam => 3.0 / (m * m - 1.0),
            ModulationFamily::Qam => 3.0 / (2.0 * (m - 1.0)),
        }
    }

    /// Angle pieces of the SER integral `sum pref int exp(-g gamma / sin^2 x) dx`.
    pub fn pieces(&self) -> Vec<AnglePiece> {
        let m = self.order as f64;
        match self.family {
            ModulationFamily::Psk => vec![AnglePiece {
                lo: 0.0,
                hi: (m - 1.0) * PI / m,
                prefactor: 1.0 / PI,
            }],
            ModulationFamily::Pam => vec![AnglePiece {
                lo: 0.0,
                hi: PI / 2.0,
                prefactor: 2.0 / PI * (m - 1.0) / m,
            }],
            ModulationFamily::Qam => {
                let outer = 4.0 / PI * (1.0 - 1.0 / m.sqrt());
                vec![
                    AnglePiece {
                        lo: 0.0,
                        hi: PI / 4.0,
                        prefactor: outer / m.sqrt(),
                    },
                    AnglePiece {
                        lo: PI / 4.0,
                        hi: PI / 2.0,
                        prefactor: outer,
                    },
                ]
            }
        }
    }

    /// SER at zero SINR: the sum of prefactor times interval length.
    pub fn ser_at_zero_snr(&self) -> f64 {
        self.pieces().iter().map(|p| p.prefactor * (p.hi - p.lo)).sum()
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.family {
            ModulationFamily::Psk => "PSK",
            ModulationFamily::Pam => "PAM",
            ModulationFamily::Qam => "QAM",
        };
        write!(f, "{}{}", self.order, name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let sys = SystemConfig::table1(10.0);
        assert!((sys.snr() - 10.0).abs() < 1e-12);
        assert!((sys.kappa(0, 1) - 10.0 * 0.05).abs() < 1e-12);
        let fb = FeedbackConfig::uniform(3, Bits::Finite(7));
        assert!((fb.rho(&sys, 0, 1) - 0.5).abs() < 1e-15);
        assert!((fb.varrho(&sys, 0, 1) - 0.25).abs() < 1e-12);
        assert!((fb.lambda(&sys, 0, 1) - 4.0).abs() < 1e-12);
        assert!((fb.xi(&sys, 0, 2) - 0.0025).abs() < 1e-15);
        assert_eq!(fb.uniform_bits(), Some(7));
        assert_eq!(FeedbackConfig::uniform(3, Bits::Infinite).rho(&sys, 0, 1), 0.0);
    }

    #[test]
    fn bits_parse_and_serde() {
        assert_eq!("inf".parse::<Bits>().unwrap(), Bits::Infinite);
        assert_eq!(" 12".parse::<Bits>().unwrap(), Bits::Finite(12));
        assert!("-1".parse::<Bits>().is_err());
        let v: Vec<Bits> = serde_json::from_str(r#"[2, "inf", "6"]"#).unwrap();
        assert_eq!(v, vec![Bits::Finite(2), Bits::Infinite, Bits::Finite(6)]);
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"[2,"inf",6]"#);
    }

    #[test]
    fn validation() {
        assert!(SystemConfig::new(4, 2, vec![1], vec![vec![1.0]], 1.0, 1.0).is_err());
        assert!(SystemConfig::new(4, 2, vec![1, 1], vec![vec![1.0, 0.1], vec![0.1, 1.0]], 1.0, 1.0).is_ok());
        assert!(SystemConfig::new(4, 2, vec![1, 0], vec![vec![1.0, 0.1], vec![0.1, 1.0]], 1.0, 1.0).is_err());
        assert!(Modulation::new(ModulationFamily::Qam, 6).is_err());
        assert!(Modulation::new(ModulationFamily::Psk, 1).is_err());
    }

    #[test]
    fn modulation_constants() {
        let psk = Modulation::psk(8);
        assert!((psk.g() - (PI / 8.0).sin().powi(2)).abs() < 1e-15);
        assert!((psk.ser_at_zero_snr() - 0.875).abs() < 1e-15);
        assert!((Modulation::pam(8).g() - 3.0 / 63.0).abs() < 1e-15);
        assert!((Modulation::qam(8).g() - 3.0 / 14.0).abs() < 1e-15);
        assert!((Modulation::pam(2).ser_at_zero_snr() - 0.5).abs() < 1e-15);
    }
}
