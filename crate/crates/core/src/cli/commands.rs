use serde_json::{json, Value};

use crate::analysis::{
    ergodic_rate_perfect, feedback_budget, min_bits_for_outage_floor, min_bits_for_rate_gap, outage_perfect,
    ser_perfect, Bits, BudgetPolicy, FeedbackConfig, Modulation, PairAnalysis,
};
use crate::error::{Error, Result};
use crate::simulator::{sweep, IaOptions, MetricEstimate, SimOptions, SweepRequest};

use super::scenario::{Metric, Scenario};
use super::table::{Cell, Table};

/// Compare gate in standard errors.
pub const Z_GATE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    GateFailed,
    NonConverged,
}

/// A finished table plus whatever else belongs in the metadata sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: Table,
    pub status: Status,
    pub notes: serde_json::Map<String, Value>,
}

impl Report {
    fn ok(table: Table) -> Self {
        Report {
            table,
            status: Status::Ok,
            notes: Default::default(),
        }
    }
}

fn tag(m: &Modulation) -> String {
    m.to_string().to_lowercase()
}

const AXES: [&str; 3] = ["d", "bits", "snr_db"];

fn axis_cells(label: &str, bits: Bits, snr_db: f64) -> Vec<Cell> {
    vec![label.into(), bits.to_string().into(), snr_db.into()]
}

/// Closed-form metrics at every sweep point, with perfect-CSI baselines,
/// losses and the high-SNR floors or ceilings.
pub fn run_analyze(sc: &Scenario) -> Result<Report> {
    let variants = sc.variants()?;
    let (k, gamma) = (sc.k(), sc.gamma_th());
    let mut header: Vec<String> = AXES.iter().map(|s| s.to_string()).collect();
    if sc.wants(Metric::Outage) {
        header.extend(["outage", "outage_perfect", "outage_loss", "outage_floor"].map(String::from));
    }
    if sc.wants(Metric::Rate) {
        header.extend(["rate", "rate_perfect", "rate_loss", "rate_ceiling"].map(String::from));
    }
    if sc.wants(Metric::Ser) {
        for m in &sc.modulation {
            let t = tag(m);
            header.extend([format!("ser_{t}"), format!("ser_perfect_{t}"), format!("ser_loss_{t}"), format!("ser_floor_{t}")]);
        }
    }
    let mut table = Table::new(header);
    for v in &variants {
        for fb in sc.feedback() {
            let bits = fb.bits[0][0];
            // floors and ceilings do not depend on SNR
            let base = PairAnalysis::new(&v.sys, &fb, k)?;
            let outage_floor = base.outage_floor(&v.sys, gamma)?;
            let rate_ceiling = if sc.wants(Metric::Rate) { base.rate_ceiling(&v.sys)? } else { f64::NAN };
            let ser_floors = if sc.wants(Metric::Ser) {
                sc.modulation.iter().map(|m| base.ser_floor(&v.sys, m)).collect::<Result<Vec<_>>>()?
            } else {
                vec![]
            };
            for &db in &sc.snr_db {
                let sys = v.sys.with_snr_db(db);
                let pa = PairAnalysis::new(&sys, &fb, k)?;
                let mut row = axis_cells(&v.label, bits, db);
                if sc.wants(Metric::Outage) {
                    let (o, p) = (pa.outage(gamma), outage_perfect(&sys, k, gamma)?);
                    row.extend([o, p, o - p, outage_floor].map(Cell::from));
                }
                if sc.wants(Metric::Rate) {
                    let (r, p) = (pa.rate()?, ergodic_rate_perfect(&sys, k)?);
                    row.extend([r, p, p - r, rate_ceiling].map(Cell::from));
                }
                if sc.wants(Metric::Ser) {
                    for (m, &floor) in sc.modulation.iter().zip(&ser_floors) {
                        let (s, p) = (pa.ser(m)?, ser_perfect(&sys, k, m)?);
                        row.extend([s, p, s - p, floor].map(Cell::from));
                    }
                }
                table.push(row);
            }
        }
    }
    Ok(Report::ok(table))
}

/// Per-variant Monte Carlo output in sweep order.
struct McRun {
    label: String,
    result: crate::simulator::SweepResult,
}

fn simulate_all(sc: &Scenario, threads: Option<usize>) -> Result<(Vec<McRun>, f64)> {
    let opts = SimOptions {
        trials: sc.trials,
        seed: sc.seed,
        mode: sc.mode,
        threads,
        ia: IaOptions {
            max_iter: sc.ia_max_iter,
            ..IaOptions::default()
        },
    };
    let req = SweepRequest {
        gamma_th: sc.gamma_th(),
        modulations: if sc.wants(Metric::Ser) { sc.modulation.clone() } else { vec![] },
    };
    let fbs = sc.feedback();
    let mut runs = Vec::new();
    let mut worst = 0.0f64;
    for v in sc.variants()? {
        let result = sweep(&v.sys, &fbs, sc.k(), sc.j(), &sc.snr_db, &req, opts)?;
        worst = worst.max(result.nonconverged_fraction());
        runs.push(McRun { label: v.label, result });
    }
    Ok((runs, worst))
}

fn convergence_status(sc: &Scenario, worst: f64, notes: &mut serde_json::Map<String, Value>) -> Status {
    notes.insert("nonconverged_fraction".into(), json!(worst));
    if worst > sc.max_nonconverged {
        Status::NonConverged
    } else {
        Status::Ok
    }
}

/// Monte Carlo estimates with standard errors at every sweep point.
pub fn run_simulate(sc: &Scenario, threads: Option<usize>) -> Result<Report> {
    let (runs, worst) = simulate_all(sc, threads)?;
    let mut header: Vec<String> = AXES.iter().map(|s| s.to_string()).collect();
    if sc.wants(Metric::Outage) {
        header.extend(["outage_mc", "outage_se"].map(String::from));
    }
    if sc.wants(Metric::Rate) {
        header.extend(["rate_mc", "rate_se"].map(String::from));
    }
    if sc.wants(Metric::Ser) {
        for m in &sc.modulation {
            let t = tag(m);
            header.extend([format!("ser_{t}_mc"), format!("ser_{t}_se")]);
        }
    }
    header.extend(["interference_mc", "interference_se"].map(String::from));
    let mut table = Table::new(header);
    for run in &runs {
        for (f, &bits) in sc.bits.iter().enumerate() {
            let interf = run.result.interference[f];
            for (si, &db) in sc.snr_db.iter().enumerate() {
                let cell = run.result.cell(f, si);
                let mut row = axis_cells(&run.label, bits, db);
                let mut put = |e: &MetricEstimate| row.extend([e.mean, e.stderr].map(Cell::from));
                if sc.wants(Metric::Outage) {
                    put(&cell.outage);
                }
                if sc.wants(Metric::Rate) {
                    put(&cell.rate);
                }
                if sc.wants(Metric::Ser) {
                    cell.ser.iter().for_each(&mut put);
                }
                put(&interf);
                table.push(row);
            }
        }
    }
    let mut notes = serde_json::Map::new();
    let status = convergence_status(sc, worst, &mut notes);
    Ok(Report { table, status, notes })
}

/// Theory against simulation, one row per (point, metric), gated at
/// `Z_GATE` standard errors.
pub fn run_compare(sc: &Scenario, threads: Option<usize>) -> Result<Report> {
    let (runs, worst) = simulate_all(sc, threads)?;
    let (k, gamma) = (sc.k(), sc.gamma_th());
    let mut header: Vec<String> = AXES.iter().map(|s| s.to_string()).collect();
    header.extend(["metric", "theory", "mc_mean", "mc_stderr", "z", "pass"].map(String::from));
    let mut table = Table::new(header);
    let mut failures = 0u64;
    let mut max_abs_z = 0.0f64;
    let variants = sc.variants()?;
    for (v, run) in variants.iter().zip(&runs) {
        for (f, &bits) in sc.bits.iter().enumerate() {
            let fb = FeedbackConfig::uniform(sc.k, bits);
            for (si, &db) in sc.snr_db.iter().enumerate() {
                let sys = v.sys.with_snr_db(db);
                let pa = PairAnalysis::new(&sys, &fb, k)?;
                let cell = run.result.cell(f, si);
                let mut pairs: Vec<(String, f64, MetricEstimate)> = Vec::new();
                if sc.wants(Metric::Outage) {
                    pairs.push(("outage".into(), pa.outage(gamma), cell.outage));
                }
                if sc.wants(Metric::Rate) {
                    pairs.push(("rate".into(), pa.rate()?, cell.rate));
                }
                if sc.wants(Metric::Ser) {
                    for (m, est) in sc.modulation.iter().zip(&cell.ser) {
                        pairs.push((format!("ser_{}", tag(m)), pa.ser(m)?, *est));
                    }
                }
                for (name, theory, est) in pairs {
                    let z = est.z_score(theory);
                    let pass = z.abs() <= Z_GATE;
                    failures += u64::from(!pass);
                    max_abs_z = max_abs_z.max(z.abs());
                    let mut row = axis_cells(&v.label, bits, db);
                    row.extend([name.into(), theory.into(), est.mean.into(), est.stderr.into(), z.into(), pass.into()]);
                    table.push(row);
                }
            }
        }
    }
    let mut notes = serde_json::Map::new();
    notes.insert("gate_z".into(), json!(Z_GATE));
    notes.insert("comparisons".into(), json!(table.rows.len()));
    notes.insert("failures".into(), json!(failures));
    notes.insert("max_abs_z".into(), json!(max_abs_z));
    let mut status = convergence_status(sc, worst, &mut notes);
    if failures > 0 {
        status = Status::GateFailed;
    }
    notes.insert("gate_passed".into(), json!(failures == 0));
    Ok(Report { table, status, notes })
}

/// Feedback schedule over the SNR axis, with the gaps it achieves. At high
/// SNR the schedule pins the outage ratio (a fixed SNR offset) and the rate
/// gap. Optional bisection targets land in the notes.
pub fn run_plan(sc: &Scenario) -> Result<Report> {
    let variants = sc.variants()?;
    let (k, gamma) = (sc.k(), sc.gamma_th());
    let spec = sc.plan.clone();
    let policy = match &spec {
        Some(p) => p.policy,
        None => {
            let b0 = sc
                .bits
                .iter()
                .find_map(|b| b.finite())
                .ok_or_else(|| Error::Config("field `bits`: planning needs a finite anchor budget".into()))?;
            BudgetPolicy::ConstantOutageGap {
                b0,
                snr0_db: sc.snr_db[0],
            }
        }
    };
    let mut snr_db = sc.snr_db.clone();
    snr_db.sort_by(f64::total_cmp);
    let grid: Vec<f64> = snr_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
    let mut table = Table::new([
        "d",
        "snr_db",
        "per_link_bits",
        "total_bits",
        "outage",
        "outage_gap",
        "outage_ratio",
        "rate",
        "rate_gap",
    ]);
    let mut notes = serde_json::Map::new();
    notes.insert("policy".into(), serde_json::to_value(policy).expect("policy serializes"));
    let mut targets = Vec::new();
    for v in &variants {
        for (sched, &db) in feedback_budget(&v.sys, k, &grid, policy)?.iter().zip(&snr_db) {
            let sys = v.sys.with_snr_db(db);
            let fb = FeedbackConfig::uniform(sc.k, Bits::Finite(sched.per_link));
            let pa = PairAnalysis::new(&sys, &fb, k)?;
            let (o, r) = (pa.outage(gamma), pa.rate()?);
            let op = outage_perfect(&sys, k, gamma)?;
            table.push(vec![
                v.label.as_str().into(),
                db.into(),
                sched.per_link.into(),
                sched.total.into(),
                o.into(),
                (o - op).into(),
                (o / op).into(),
                r.into(),
                (ergodic_rate_perfect(&sys, k)? - r).into(),
            ]);
        }
        if let Some(p) = &spec {
            let mut entry = serde_json::Map::new();
            entry.insert("d".into(), json!(v.label));
            if let Some(t) = p.target_floor {
                entry.insert("target_floor".into(), json!(t));
                entry.insert(
                    "min_bits_for_floor".into(),
                    json!(min_bits_for_outage_floor(&v.sys, k, gamma, t, p.b_max)?),
                );
            }
            if let Some(t) = p.target_rate_gap {
                let sys = v.sys.with_snr_db(snr_db[snr_db.len() - 1]);
                entry.insert("target_rate_gap".into(), json!(t));
                entry.insert("rate_gap_snr_db".into(), json!(sys.snr_db()));
                entry.insert("min_bits_for_rate_gap".into(), json!(min_bits_for_rate_gap(&sys, k, t, p.b_max)?));
            }
            targets.push(Value::Object(entry));
        }
    }
    if !targets.is_empty() {
        notes.insert("targets".into(), Value::Array(targets));
    }
    Ok(Report {
        table,
        status: Status::Ok,
        notes,
    })
}
