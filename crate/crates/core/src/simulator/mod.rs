//! Monte Carlo ground truth: channels, quantized CSI, IA transceivers, SINR.

mod channel;
mod ia;
mod montecarlo;

pub use channel::{
    error_model_quantize, rvq_quantize, sample_channels, ChannelRealization, QuantMode, QuantizedCsi, RVQ_MAX_BITS,
};
pub use ia::{ia_solve, sinr, sinr_parts, IaOptions, IaSolution};
pub use montecarlo::{
    estimate_outage, estimate_rate, estimate_ser, sample_pair, sweep, Moments, PairSample, SimOptions, Simulation,
    SweepCell, SweepRequest, SweepResult,
};

use serde::Serialize;

use crate::analysis::SystemConfig;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl MetricEstimate {
    /// `(theory - mean) / stderr`; zero when both agree exactly.
    pub fn z_score(&self, theory: f64) -> f64 {
        let diff = self.mean - theory;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.stderr
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub message: String,
}

/// Proper-system count: every pair's free variables must cover the
/// alignment constraints it takes part in. Passing does not promise the
/// solver converges.
pub fn feasibility_check(sys: &SystemConfig) -> Feasibility {
    let (nt, nr) = (sys.nt as i64, sys.nr as i64);
    for (k, &d) in sys.d.iter().enumerate() {
        let d = d as i64;
        if d > nt.min(nr) {
            return Feasibility {
                feasible: false,
                message: format!("pair {k}: {d} streams exceed min(nt, nr) = {}", nt.min(nr)),
            };
        }
    }
    let vars: i64 = sys.d.iter().map(|&d| d as i64 * (nt + nr - 2 * d as i64)).sum();
    let mut cons = 0i64;
    for (k, &dk) in sys.d.iter().enumerate() {
        for (i, &di) in sys.d.iter().enumerate() {
            if i != k {
                cons += dk as i64 * di as i64;
            }
        }
    }
    Feasibility {
        feasible: vars >= cons,
        message: format!("{vars} free variables vs {cons} alignment constraints"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasibility_examples() {
        let sys = SystemConfig::table1(0.0);
        assert!(feasibility_check(&sys).feasible);
        let mut sys2 = sys.with_streams(vec![2, 2, 2]);
        sys2.nt = 2;
        assert!(!feasibility_check(&sys2).feasible);
        assert!(!feasibility_check(&sys.with_streams(vec![2, 2, 2])).feasible);
        let mut sys4 = sys.with_streams(vec![2, 2, 2]);
        sys4.nr = 4;
        assert!(feasibility_check(&sys4).feasible);
    }
}
