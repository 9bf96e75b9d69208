//! Closed-form performance of IA with quantized CSI.
//!
//! All metrics are for one data stream of pair `k` (0-based). They do not
//! depend on which stream is picked, so there is no stream argument.

mod config;
mod outage;
mod pair;
mod planner;
mod rate;
mod ser;

pub use config::{Bits, FeedbackConfig, Modulation, ModulationFamily, SystemConfig};
pub use outage::{outage_floor, outage_loss, outage_perfect, outage_probability, outage_single_stream};
pub use pair::PairAnalysis;
pub use planner::{
    feedback_budget, min_bits_for_outage_floor, min_bits_for_rate_gap, BudgetPolicy, BudgetSchedule,
};
pub use rate::{
    ergodic_rate, ergodic_rate_perfect, ergodic_rate_single_stream, rate_ceiling, rate_high_largeb,
    rate_loss, rate_loss_high, rate_loss_high_largeb, rate_perfect_high, z_term,
};
pub use ser::{conditional_ser, ser_average, ser_floor, ser_loss, ser_perfect, ser_single_stream};
