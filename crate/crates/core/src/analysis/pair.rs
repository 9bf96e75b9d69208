use crate::error::{Error, Result};
use crate::mixture::{build_mixture, ErlangMixture, Parametrization, SourceSpec};
use crate::simulator::feasibility_check;

use super::config::{Bits, FeedbackConfig, SystemConfig};

/// Residual-interference model of one pair, in the SNR-dependent (`kappa`)
/// scaling and in the SNR-free one used by floors and ceilings.
#[derive(Debug, Clone)]
pub struct PairAnalysis {
    pub k: usize,
    /// `kappa_{k,k}`.
    pub kappa: f64,
    pub param: Parametrization,
    /// Interference sources, gamma scales already mapped through `param`.
    pub sources: SourceSpec,
    /// Same sources with scales divided by the transmit SNR.
    pub sources_unit: SourceSpec,
    /// Law of the residual interference `I`.
    pub interference: ErlangMixture,
    /// Law of `I + S` where `S ~ kappa Exp(1)` is the desired signal.
    pub signal_plus_interference: ErlangMixture,
}

impl PairAnalysis {
    pub fn new(sys: &SystemConfig, fb: &FeedbackConfig, k: usize) -> Result<Self> {
        Self::with_parametrization(sys, fb, k, Parametrization::default())
    }

    pub fn with_parametrization(
        sys: &SystemConfig,
        fb: &FeedbackConfig,
        k: usize,
        param: Parametrization,
    ) -> Result<Self> {
        sys.validate()?;
        fb.validate(sys)?;
        sys.check_pair(k)?;
        let feas = feasibility_check(sys);
        if !feas.feasible {
            return Err(Error::Infeasible(feas.message));
        }
        let snr = sys.snr();
        let mut shapes = Vec::with_capacity(sys.k);
        let mut scales = Vec::with_capacity(sys.k);
        for i in 0..sys.k {
            if fb.bits[k][i] == Bits::Infinite {
                continue;
            }
            let shape = if i == k { sys.d[k] - 1 } else { sys.d[i] };
            if shape == 0 {
                continue;
            }
            shapes.push(shape);
            scales.push(param.gamma_scale(shape, fb.varrho(sys, k, i)));
        }
        let sources = SourceSpec::new(&shapes, &scales)?;
        let unit: Vec<f64> = scales.iter().map(|s| s / snr).collect();
        let sources_unit = SourceSpec::new(&shapes, &unit)?;
        let kappa = sys.kappa(k, k);
        let interference = build_mixture(&sources)?;
        shapes.push(1);
        scales.push(kappa);
        let signal_plus_interference = build_mixture(&SourceSpec::new(&shapes, &scales)?)?;
        Ok(PairAnalysis {
            k,
            kappa,
            param,
            sources,
            sources_unit,
            interference,
            signal_plus_interference,
        })
    }

    /// True when no residual interference survives (perfect CSI everywhere
    /// that matters).
    pub fn interference_free(&self) -> bool {
        self.sources.is_empty()
    }

    /// `kappa_{k,k} / SNR = alpha_{k,k} / d_k`.
    pub fn kappa_unit(&self, sys: &SystemConfig) -> f64 {
        self.kappa / sys.snr()
    }

    /// Law of `I / SNR`.
    pub fn interference_unit(&self) -> Result<ErlangMixture> {
        build_mixture(&self.sources_unit)
    }

    /// Law of `(I + S) / SNR`.
    pub fn signal_plus_interference_unit(&self, sys: &SystemConfig) -> Result<ErlangMixture> {
        let mut shapes = self.sources_unit.shapes().to_vec();
        let mut scales = self.sources_unit.scales().to_vec();
        shapes.push(1);
        scales.push(self.kappa_unit(sys));
        build_mixture(&SourceSpec::new(&shapes, &scales)?)
    }

    /// Interference rates `1 / varrho_{k,i}` for the all-single-stream forms.
    pub fn single_stream_rates(sys: &SystemConfig, fb: &FeedbackConfig, k: usize) -> Result<Vec<f64>> {
        sys.validate()?;
        fb.validate(sys)?;
        sys.check_pair(k)?;
        if sys.d.iter().any(|&d| d != 1) {
            return Err(Error::Config("single-stream form needs d = 1 for every pair".into()));
        }
        let feas = feasibility_check(sys);
        if !feas.feasible {
            return Err(Error::Infeasible(feas.message));
        }
        let rates: Vec<f64> = (0..sys.k)
            .filter(|&i| i != k && fb.bits[k][i] != Bits::Infinite)
            .map(|i| fb.lambda(sys, k, i))
            .collect();
        check_distinct(&rates)?;
        Ok(rates)
    }
}

pub(crate) fn check_distinct(rates: &[f64]) -> Result<()> {
    for a in 0..rates.len() {
        for b in a + 1..rates.len() {
            if (rates[a] - rates[b]).abs() <= crate::mixture::MERGE_RTOL * rates[a].max(rates[b]) {
                return Err(Error::DuplicateScales(a, b));
            }
        }
    }
    Ok(())
}
