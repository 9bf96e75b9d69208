use serde_json::json;

use crate::analysis::{rate_high_largeb, Bits, FeedbackConfig, Modulation, PairAnalysis};
use crate::error::{Error, Result};

use super::commands::{run_analyze, run_compare, Report, Status};
use super::scenario::{Metric, Scenario};
use super::table::Table;
#[cfg(test)]
use super::table::Cell;

pub const PRESETS: [&str; 8] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9"];

fn snr_range(lo: i32, hi: i32, step: usize) -> Vec<f64> {
    (lo..=hi).step_by(step).map(f64::from).collect()
}

/// Built-in scenario behind each figure preset.
pub fn preset_scenario(name: &str) -> Result<Scenario> {
    let mut sc = Scenario::table1();
    sc.snr_db = snr_range(-10, 40, 5);
    sc.bits = vec![Bits::Finite(2), Bits::Finite(6), Bits::Finite(10), Bits::Infinite];
    match name {
        "fig2" | "fig3" => sc.metrics = vec![Metric::Outage],
        "fig4" | "fig5" => sc.metrics = vec![Metric::Rate],
        "fig6" => {
            // two streams per pair need a square 4x4 setup to stay feasible
            sc.nt = 4;
            sc.nr = 4;
            sc.metrics = vec![Metric::Rate];
            sc.bits = vec![Bits::Finite(6), Bits::Infinite];
            sc.streams = Some(vec![vec![1, 1, 1], vec![2, 2, 2]]);
        }
        "fig7" => {
            sc.metrics = vec![Metric::Ser];
            sc.bits = vec![Bits::Finite(6)];
            sc.modulation = vec![Modulation::psk(8), Modulation::pam(8), Modulation::qam(8)];
        }
        "fig8" => {
            sc.metrics = vec![Metric::Ser];
            sc.modulation = vec![Modulation::qam(8)];
        }
        "fig9" => {
            sc.metrics = vec![Metric::Rate];
            sc.snr_db = vec![60.0, 80.0];
            sc.bits = (30..=60).map(Bits::Finite).collect();
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}`; expected one of {}",
                PRESETS.join(", ")
            )))
        }
    }
    sc.validate()?;
    Ok(sc)
}

/// Exact rate, the fixed-accuracy ceiling and its large-B line against `B`,
/// with per-bit slopes of the last two. The line climbs by exactly
/// `1/(NtNr-1)` per bit; the ceiling approaches that slope as `rho -> 0`.
pub fn rate_vs_bits(sc: &Scenario) -> Result<Report> {
    let k = sc.k();
    let dim = (sc.nt * sc.nr - 1) as f64;
    let mut table = Table::new([
        "snr_db",
        "bits",
        "rate",
        "rate_ceiling",
        "rate_high_largeb",
        "ceiling_slope",
        "largeb_slope",
    ]);
    let v = &sc.variants()?[0];
    let (mut line_err, mut ceiling_err) = (0.0f64, 0.0f64);
    for &db in &sc.snr_db {
        let sys = v.sys.with_snr_db(db);
        let mut prev: Option<(u32, f64, f64)> = None;
        for &bits in &sc.bits {
            let b = bits
                .finite()
                .ok_or_else(|| Error::Config("field `bits`: rate-vs-B needs finite budgets".into()))?;
            let fb = FeedbackConfig::uniform(sc.k, bits);
            let pa = PairAnalysis::new(&sys, &fb, k)?;
            let ceiling = pa.rate_ceiling(&sys)?;
            let line = rate_high_largeb(&sys, &fb, k)?;
            let (cs, ls) = match prev {
                Some((pb, pc, pl)) if b > pb => {
                    let db = (b - pb) as f64;
                    ((ceiling - pc) / db, (line - pl) / db)
                }
                _ => (f64::NAN, f64::NAN),
            };
            if ls.is_finite() {
                line_err = line_err.max((ls - 1.0 / dim).abs());
                ceiling_err = ceiling_err.max((cs - 1.0 / dim).abs());
            }
            prev = Some((b, ceiling, line));
            table.push(vec![
                db.into(),
                b.into(),
                pa.rate()?.into(),
                ceiling.into(),
                line.into(),
                cs.into(),
                ls.into(),
            ]);
        }
    }
    let mut notes = serde_json::Map::new();
    notes.insert("expected_slope".into(), json!(1.0 / dim));
    notes.insert("largeb_slope_error".into(), json!(line_err));
    notes.insert("ceiling_slope_error".into(), json!(ceiling_err));
    Ok(Report {
        table,
        status: Status::Ok,
        notes,
    })
}

/// Runs a preset on an already resolved scenario.
pub fn run_preset(name: &str, sc: &Scenario, threads: Option<usize>) -> Result<Report> {
    match name {
        "fig2" | "fig4" | "fig7" => run_compare(sc, threads),
        "fig9" => rate_vs_bits(sc),
        _ => run_analyze(sc),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves() {
        for name in PRESETS {
            preset_scenario(name).unwrap();
        }
        assert!(preset_scenario("fig1").is_err());
    }

    #[test]
    fn fig9_slopes() {
        let sc = preset_scenario("fig9").unwrap();
        let r = rate_vs_bits(&sc).unwrap();
        assert!(r.notes["largeb_slope_error"].as_f64().unwrap() < 1e-9);
        assert_eq!(r.table.rows.len(), 62);
        // the exact ceiling's slope creeps up to 1/7 from below
        let col = r.table.column("ceiling_slope").unwrap();
        let slopes: Vec<f64> = r.table.rows[1..31]
            .iter()
            .map(|row| match row[col] {
                Cell::Num(x) => x,
                _ => panic!(),
            })
            .collect();
        assert!(slopes.windows(2).all(|w| w[1] > w[0]));
        assert!(slopes.iter().all(|&s| s < 1.0 / 7.0 && s > 1.0 / 7.0 - 3e-3));
    }
}
