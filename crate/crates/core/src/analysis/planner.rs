use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::{Bits, FeedbackConfig, SystemConfig};
use super::outage::outage_floor;
use super::rate::rate_loss;

/// How feedback scales with SNR. Both policies keep `SNR * rho` fixed per
/// link, which pins the outage gap and the rate gap alike; they differ only
/// in which quantity the anchor `(b0, snr0_db)` was chosen for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum BudgetPolicy {
    ConstantOutageGap { b0: u32, snr0_db: f64 },
    ConstantRateGap { b0: u32, snr0_db: f64 },
}

impl BudgetPolicy {
    fn anchor(&self) -> (u32, f64) {
        match *self {
            BudgetPolicy::ConstantOutageGap { b0, snr0_db } | BudgetPolicy::ConstantRateGap { b0, snr0_db } => {
                (b0, snr0_db)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetSchedule {
    pub snr: f64,
    /// Bits on each of the `K` links feeding back to the receiver.
    pub per_link: u32,
    /// Sum over the links of that receiver.
    pub total: u32,
}

/// Bits per link at each (linear) SNR so that the chosen gap stays put.
pub fn feedback_budget(sys: &SystemConfig, k: usize, snr_grid: &[f64], policy: BudgetPolicy) -> Result<Vec<BudgetSchedule>> {
    sys.validate()?;
    sys.check_pair(k)?;
    if snr_grid.is_empty() {
        return Err(Error::Config("SNR grid is empty".into()));
    }
    if snr_grid.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::Config("SNR grid must be positive and finite".into()));
    }
    if snr_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("SNR grid must be ascending".into()));
    }
    let (b0, snr0_db) = policy.anchor();
    let snr0 = 10f64.powf(snr0_db / 10.0);
    let dim = sys.feedback_dim() as f64;
    Ok(snr_grid
        .iter()
        .map(|&snr| {
            // the small offset keeps exact powers of two from rounding up
            let extra = (dim * (snr / snr0).log2() - 1e-9).ceil();
            let per_link = (b0 as f64 + extra).max(0.0) as u32;
            BudgetSchedule {
                snr,
                per_link,
                total: per_link * sys.k as u32,
            }
        })
        .collect())
}

/// Smallest `b` in `0..=b_max` with `pred(b)` true, given `pred` is monotone.
fn bisect<F: FnMut(u32) -> Result<bool>>(b_max: u32, mut pred: F, what: &str) -> Result<u32> {
    if pred(0)? {
        return Ok(0);
    }
    if !pred(b_max)? {
        return Err(Error::Unattainable(format!("{what} not reached with {b_max} bits per link")));
    }
    let (mut lo, mut hi) = (0, b_max);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Minimum common bit count whose outage floor is at most `target`.
pub fn min_bits_for_outage_floor(sys: &SystemConfig, k: usize, gamma_th: f64, target: f64, b_max: u32) -> Result<u32> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Unattainable(format!("floor target {target} outside (0, 1)")));
    }
    bisect(
        b_max,
        |b| Ok(outage_floor(sys, &FeedbackConfig::uniform(sys.k, Bits::Finite(b)), k, gamma_th)? <= target),
        "outage floor target",
    )
}

/// Minimum common bit count whose rate loss at the system's SNR is at most
/// `target` bits/s/Hz.
pub fn min_bits_for_rate_gap(sys: &SystemConfig, k: usize, target: f64, b_max: u32) -> Result<u32> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::Unattainable(format!("rate-gap target {target} must be positive")));
    }
    bisect(
        b_max,
        |b| Ok(rate_loss(sys, &FeedbackConfig::uniform(sys.k, Bits::Finite(b)), k)? <= target),
        "rate-gap target",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_adds_dimension_per_link() {
        let sys = SystemConfig::table1(0.0);
        let grid: Vec<f64> = (0..8).map(|i| 2f64.powi(i)).collect();
        let policy = BudgetPolicy::ConstantOutageGap { b0: 4, snr0_db: 0.0 };
        let s = feedback_budget(&sys, 0, &grid, policy).unwrap();
        assert_eq!(s[0].per_link, 4);
        for w in s.windows(2) {
            assert_eq!(w[1].per_link - w[0].per_link, 7);
            assert_eq!(w[1].total - w[0].total, 21);
        }
    }

    #[test]
    fn thirty_db_span() {
        let sys = SystemConfig::table1(0.0);
        let policy = BudgetPolicy::ConstantRateGap { b0: 0, snr0_db: 0.0 };
        let s = feedback_budget(&sys, 0, &[1.0, 1000.0], policy).unwrap();
        assert_eq!(s[1].per_link - s[0].per_link, 70);
        assert!(feedback_budget(&sys, 0, &[10.0, 1.0], policy).is_err());
        assert!(feedback_budget(&sys, 0, &[0.0], policy).is_err());
    }

    #[test]
    fn floor_bisection_brackets() {
        let sys = SystemConfig::table1(10.0);
        let b = min_bits_for_outage_floor(&sys, 0, 1.0, 0.01, 200).unwrap();
        let floor = |b| outage_floor(&sys, &FeedbackConfig::uniform(3, Bits::Finite(b)), 0, 1.0).unwrap();
        assert!(b > 0);
        assert!(floor(b) <= 0.01 && floor(b - 1) > 0.01);
        assert!(matches!(min_bits_for_outage_floor(&sys, 0, 1.0, 0.0, 200), Err(Error::Unattainable(_))));
        assert!(matches!(min_bits_for_outage_floor(&sys, 0, 1.0, 1.5, 200), Err(Error::Unattainable(_))));
        assert!(matches!(min_bits_for_outage_floor(&sys, 0, 1.0, 1e-12, 3), Err(Error::Unattainable(_))));
    }

    #[test]
    fn rate_gap_bisection_brackets() {
        let sys = SystemConfig::table1(20.0);
        let b = min_bits_for_rate_gap(&sys, 0, 0.1, 200).unwrap();
        let loss = |b| rate_loss(&sys, &FeedbackConfig::uniform(3, Bits::Finite(b)), 0).unwrap();
        assert!(loss(b) <= 0.1 && loss(b - 1) > 0.1);
    }
}
