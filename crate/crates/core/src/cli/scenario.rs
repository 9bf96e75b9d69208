use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::analysis::{BudgetPolicy, Bits, FeedbackConfig, Modulation, SystemConfig};
use crate::error::{Error, Result};
use crate::simulator::{feasibility_check, IaOptions, QuantMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerUnit {
    Linear,
    Dbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Outage,
    Rate,
    Ser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSpec {
    #[serde(flatten)]
    pub policy: BudgetPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_rate_gap: Option<f64>,
    #[serde(default = "default_b_max")]
    pub b_max: u32,
}

fn default_b_max() -> u32 {
    256
}

fn default_stream() -> usize {
    1
}

fn default_nonconverged() -> f64 {
    1e-3
}

fn default_ia_max_iter() -> usize {
    IaOptions::default().max_iter
}

/// A batch job: one system, a grid of SNRs, feedback budgets and stream
/// layouts, and the metrics to produce. `pair` and `stream` count from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(rename = "K")]
    pub k: usize,
    pub nt: usize,
    pub nr: usize,
    pub d: Vec<u32>,
    #[serde(deserialize_with = "rows_or_flat")]
    pub alpha: Vec<Vec<f64>>,
    pub p_dbm_or_linear: PowerUnit,
    pub sigma2: f64,
    pub snr_db: Vec<f64>,
    pub bits: Vec<Bits>,
    pub gamma_th_db: f64,
    #[serde(deserialize_with = "one_or_many")]
    pub modulation: Vec<Modulation>,
    pub metrics: Vec<Metric>,
    pub trials: u64,
    pub seed: u64,
    pub pair: usize,
    #[serde(default = "default_stream")]
    pub stream: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Alternative stream layouts swept alongside `d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub streams: Option<Vec<Vec<u32>>>,
    #[serde(default)]
    pub mode: QuantMode,
    /// Tolerated fraction of trials where the IA solver stalls.
    #[serde(default = "default_nonconverged")]
    pub max_nonconverged: f64,
    #[serde(default = "default_ia_max_iter")]
    pub ia_max_iter: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanSpec>,
}

fn rows_or_flat<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<Vec<f64>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Shape {
        Rows(Vec<Vec<f64>>),
        Flat(Vec<f64>),
    }
    Ok(match Shape::deserialize(de)? {
        Shape::Rows(r) => r,
        Shape::Flat(v) => {
            let n = (v.len() as f64).sqrt().round() as usize;
            if n * n != v.len() {
                return Err(serde::de::Error::custom(format!(
                    "flat alpha must hold K*K entries, got {}",
                    v.len()
                )));
            }
            v.chunks(n).map(<[f64]>::to_vec).collect()
        }
    })
}

fn one_or_many<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<Modulation>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Mods {
        One(Modulation),
        Many(Vec<Modulation>),
    }
    Ok(match Mods::deserialize(de)? {
        Mods::One(m) => vec![m],
        Mods::Many(v) => v,
    })
}

/// One stream layout of the scenario with its system config at unit SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub label: String,
    pub sys: SystemConfig,
}

fn field(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{name}`: {msg}"))
}

impl Scenario {
    /// The standard three-pair 4x2 setup at 0 dB threshold.
    pub fn table1() -> Self {
        let sys = SystemConfig::table1(0.0);
        Scenario {
            k: 3,
            nt: sys.nt,
            nr: sys.nr,
            d: sys.d.clone(),
            alpha: sys.alpha.clone(),
            p_dbm_or_linear: PowerUnit::Linear,
            sigma2: 1.0,
            snr_db: vec![0.0, 10.0, 20.0, 30.0],
            bits: vec![Bits::Finite(6)],
            gamma_th_db: 0.0,
            modulation: vec![Modulation::psk(8)],
            metrics: vec![Metric::Outage, Metric::Rate, Metric::Ser],
            trials: 100_000,
            seed: 1,
            pair: 1,
            stream: 1,
            output: None,
            streams: None,
            mode: QuantMode::ErrorModel,
            max_nonconverged: default_nonconverged(),
            ia_max_iter: default_ia_max_iter(),
            plan: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| Error::Config(format!("parse error: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(field("K", format!("need at least 2 pairs, got {}", self.k)));
        }
        if self.d.len() != self.k {
            return Err(field("d", format!("expected {} entries, got {}", self.k, self.d.len())));
        }
        if self.alpha.len() != self.k {
            return Err(field("alpha", format!("expected {} rows, got {}", self.k, self.alpha.len())));
        }
        if let Some((r, row)) = self.alpha.iter().enumerate().find(|(_, row)| row.len() != self.k) {
            return Err(field("alpha", format!("row {r} has {} entries, expected {}", row.len(), self.k)));
        }
        if !self.sigma2.is_finite() || (self.p_dbm_or_linear == PowerUnit::Linear && self.sigma2 <= 0.0) {
            return Err(field("sigma2", format!("invalid noise power {}", self.sigma2)));
        }
        if self.snr_db.is_empty() {
            return Err(field("snr_db", "axis is empty"));
        }
        if let Some(x) = self.snr_db.iter().find(|x| !x.is_finite()) {
            return Err(field("snr_db", format!("non-finite entry {x}")));
        }
        if self.bits.is_empty() {
            return Err(field("bits", "axis is empty"));
        }
        if !self.gamma_th_db.is_finite() {
            return Err(field("gamma_th_db", "must be finite"));
        }
        if self.metrics.is_empty() {
            return Err(field("metrics", "list is empty"));
        }
        if self.metrics.contains(&Metric::Ser) && self.modulation.is_empty() {
            return Err(field("modulation", "SER requested without a modulation"));
        }
        for m in &self.modulation {
            m.validate().map_err(|e| field("modulation", e))?;
        }
        if !(0.0..=1.0).contains(&self.max_nonconverged) {
            return Err(field("max_nonconverged", "must lie in [0, 1]"));
        }
        if self.ia_max_iter == 0 {
            return Err(field("ia_max_iter", "must be at least 1"));
        }
        if self.pair < 1 || self.pair > self.k {
            return Err(field("pair", format!("must lie in 1..={}, got {}", self.k, self.pair)));
        }
        if let Some(layouts) = &self.streams {
            if layouts.is_empty() {
                return Err(field("streams", "axis is empty"));
            }
        }
        for v in self.variants_unchecked() {
            v.sys.validate().map_err(|e| field("d", format!("layout {}: {e}", v.label)))?;
            let f = feasibility_check(&v.sys);
            if !f.feasible {
                return Err(field("d", format!("layout {}: {}", v.label, f.message)));
            }
            let dk = v.sys.d[self.pair - 1] as usize;
            if self.stream < 1 || self.stream > dk {
                return Err(field("stream", format!("must lie in 1..={dk} for layout {}", v.label)));
            }
        }
        if let Some(plan) = &self.plan {
            if plan.target_floor.is_some_and(|t| !(t > 0.0 && t < 1.0)) {
                return Err(field("plan.target_floor", "must lie in (0, 1)"));
            }
            if plan.target_rate_gap.is_some_and(|t| !(t > 0.0)) {
                return Err(field("plan.target_rate_gap", "must be positive"));
            }
        }
        Ok(())
    }

    /// Noise power in linear units.
    pub fn sigma2_linear(&self) -> f64 {
        match self.p_dbm_or_linear {
            PowerUnit::Linear => self.sigma2,
            PowerUnit::Dbm => 10f64.powf(self.sigma2 / 10.0),
        }
    }

    pub fn gamma_th(&self) -> f64 {
        10f64.powf(self.gamma_th_db / 10.0)
    }

    /// Zero-based pair index.
    pub fn k(&self) -> usize {
        self.pair - 1
    }

    /// Zero-based stream index.
    pub fn j(&self) -> usize {
        self.stream - 1
    }

    fn variants_unchecked(&self) -> Vec<Variant> {
        let layouts = self.streams.clone().unwrap_or_else(|| vec![self.d.clone()]);
        layouts
            .into_iter()
            .map(|d| Variant {
                label: d.iter().map(u32::to_string).collect::<Vec<_>>().join("-"),
                sys: SystemConfig {
                    k: self.k,
                    nt: self.nt,
                    nr: self.nr,
                    d,
                    alpha: self.alpha.clone(),
                    p: self.sigma2_linear(),
                    sigma2: self.sigma2_linear(),
                },
            })
            .collect()
    }

    pub fn variants(&self) -> Result<Vec<Variant>> {
        self.validate()?;
        Ok(self.variants_unchecked())
    }

    pub fn feedback(&self) -> Vec<FeedbackConfig> {
        self.bits.iter().map(|&b| FeedbackConfig::uniform(self.k, b)).collect()
    }

    pub fn wants(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_round_trips() {
        let mut sc = Scenario::table1();
        sc.bits = vec![Bits::Finite(2), Bits::Infinite];
        sc.streams = Some(vec![vec![1, 1, 1]]);
        sc.plan = Some(PlanSpec {
            policy: BudgetPolicy::ConstantOutageGap { b0: 6, snr0_db: 10.0 },
            target_floor: Some(1e-3),
            target_rate_gap: None,
            b_max: 100,
        });
        let back = Scenario::from_json(&sc.to_json()).unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn accepts_flat_alpha_and_single_modulation() {
        let text = r#"{"K":2,"nt":2,"nr":2,"d":[1,1],"alpha":[1,0.1,0.2,1],
            "p_dbm_or_linear":"linear","sigma2":1,"snr_db":[10],"bits":[4,"inf"],
            "gamma_th_db":0,"modulation":{"family":"qam","order":4},
            "metrics":["outage"],"trials":1000,"seed":3,"pair":2,"output":"x.csv"}"#;
        let sc = Scenario::from_json(text).unwrap();
        assert_eq!(sc.alpha, vec![vec![1.0, 0.1], vec![0.2, 1.0]]);
        assert_eq!(sc.modulation, vec![Modulation::qam(4)]);
        assert_eq!(sc.bits, vec![Bits::Finite(4), Bits::Infinite]);
        assert_eq!(sc.k(), 1);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let mut sc = Scenario::table1();
        sc.pair = 4;
        assert!(sc.validate().unwrap_err().to_string().contains("`pair`"));
        let mut sc = Scenario::table1();
        sc.alpha[1].pop();
        assert!(sc.validate().unwrap_err().to_string().contains("`alpha`"));
        let mut sc = Scenario::table1();
        sc.d = vec![2, 2, 2];
        assert!(sc.validate().unwrap_err().to_string().contains("`d`"));
        let err = Scenario::from_json("{\n \"K\": 3,\n \"bogus\": 1}").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn dbm_noise_converts() {
        let mut sc = Scenario::table1();
        sc.p_dbm_or_linear = PowerUnit::Dbm;
        sc.sigma2 = 10.0;
        assert!((sc.sigma2_linear() - 10.0).abs() < 1e-12);
        let v = sc.variants().unwrap();
        assert!((v[0].sys.with_snr_db(20.0).snr() - 100.0).abs() < 1e-9);
    }
}
