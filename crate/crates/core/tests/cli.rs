use std::path::Path;
use std::process::Command;

use iacsi::analysis::BudgetPolicy;
use iacsi::cli::{meta_path, PlanSpec, Scenario};

fn iacsi(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_iacsi")).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_scenario(dir: &Path, name: &str, edit: impl FnOnce(&mut Scenario)) -> String {
    let mut sc = Scenario::table1();
    sc.snr_db = vec![0.0, 20.0];
    sc.bits = vec![iacsi::Bits::Finite(6)];
    sc.trials = 4000;
    edit(&mut sc);
    let path = dir.join(name);
    std::fs::write(&path, sc.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn analyze_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "s.json", |_| {});
    let out = dir.path().join("a.csv");
    let (code, _, err) = iacsi(&["analyze", "--config", &cfg, "--output", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("d,bits,snr_db,outage,"));
    assert_eq!(lines.count(), 2);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(meta_path(&out)).unwrap()).unwrap();
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["seed"], 1);
}

#[test]
fn metadata_scenario_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig3.csv");
    let (code, _, err) = iacsi(&["preset", "fig3", "--seed", "42", "--output", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(meta_path(&out)).unwrap()).unwrap();
    let written = serde_json::to_string(&meta["scenario"]).unwrap();
    let back = Scenario::from_json(&written).unwrap();
    assert_eq!(back.seed, 42);
    assert_eq!(back.output.as_deref(), Some(out.as_path()));
    assert_eq!(Scenario::from_json(&back.to_json()).unwrap(), back);
    // rerunning from the written scenario reproduces the table
    let cfg = dir.path().join("again.json");
    let mut again = back.clone();
    again.output = Some(dir.path().join("again.csv"));
    std::fs::write(&cfg, again.to_json()).unwrap();
    assert_eq!(iacsi(&["analyze", "--config", cfg.to_str().unwrap()]).0, 0);
    assert_eq!(
        std::fs::read(&out).unwrap(),
        std::fs::read(dir.path().join("again.csv")).unwrap()
    );
}

#[test]
fn simulation_output_is_byte_stable_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "s.json", |_| {});
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let (code, _, err) =
            iacsi(&["simulate", "--config", &cfg, "--threads", threads, "--output", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("1", "one.csv"), run("3", "three.csv"));
}

#[test]
fn compare_passes_gate_on_error_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "s.json", |_| {});
    let (code, stdout, err) = iacsi(&["compare", "--config", &cfg, "--trials", "20000"]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.starts_with("d,bits,snr_db,metric,theory,mc_mean,mc_stderr,z,pass\n"));
    assert_eq!(stdout.lines().count(), 1 + 2 * 3);
}

#[test]
fn compare_gate_failure_exits_3() {
    // real codebooks leave more interference than the cell model at high SNR
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "s.json", |sc| {
        sc.snr_db = vec![30.0];
        sc.metrics = vec![iacsi::cli::Metric::Rate];
        sc.trials = 20_000;
        sc.seed = 5;
    });
    let (code, _, err) = iacsi(&["compare", "--config", &cfg, "--mode", "rvq"]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn stalled_solver_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "s.json", |sc| {
        sc.nt = 4;
        sc.nr = 4;
        sc.d = vec![2, 2, 2];
        sc.ia_max_iter = 1;
        sc.trials = 1000;
    });
    let (code, _, err) = iacsi(&["simulate", "--config", &cfg]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"K\": 3,\n  \"nt\": \"four\"\n}").unwrap();
    let (code, _, err) = iacsi(&["analyze", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("line 3"), "{err}");

    let cfg = write_scenario(dir.path(), "pair.json", |sc| sc.pair = 9);
    let (code, _, err) = iacsi(&["analyze", "--config", &cfg]);
    assert_eq!(code, 2);
    assert!(err.contains("`pair`"), "{err}");

    assert_eq!(iacsi(&["analyze"]).0, 2);
    assert_eq!(iacsi(&["preset", "fig1"]).0, 2);
    assert_eq!(iacsi(&["simulate", "--config", &write_scenario(dir.path(), "t.json", |_| {}), "--trials", "10"]).0, 2);
}

#[test]
fn plan_adds_seventy_bits_over_thirty_db() {
    let dir = tempfile::tempdir().unwrap();
    // the last point is exactly ten SNR doublings above the first
    let ten_doublings = 40.0 + 100.0 * 2f64.log10();
    let cfg = write_scenario(dir.path(), "s.json", |sc| {
        sc.snr_db = vec![40.0, 70.0, ten_doublings];
        sc.plan = Some(PlanSpec {
            policy: BudgetPolicy::ConstantOutageGap { b0: 50, snr0_db: 40.0 },
            target_floor: None,
            target_rate_gap: None,
            b_max: 256,
        });
    });
    let (code, stdout, err) = iacsi(&["plan", "--config", &cfg]);
    assert_eq!(code, 0, "{err}");
    let rows: Vec<Vec<&str>> = stdout.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let col = |name: &str| stdout.lines().next().unwrap().split(',').position(|h| h == name).unwrap();
    let bits: Vec<i64> = rows.iter().map(|r| r[col("per_link_bits")].parse().unwrap()).collect();
    assert_eq!(bits[1] - bits[0], 70);
    assert_eq!(bits[2] - bits[0], 70);
    // with no rounding in between, outage relative to perfect CSI and the
    // rate gap both stay put
    let ratio: Vec<f64> = rows.iter().map(|r| r[col("outage_ratio")].parse().unwrap()).collect();
    assert!((ratio[2] - ratio[0]).abs() < 0.01 * ratio[0], "{ratio:?}");
    let gap: Vec<f64> = rows.iter().map(|r| r[col("rate_gap")].parse().unwrap()).collect();
    assert!((gap[2] - gap[0]).abs() < 0.01, "{gap:?}");
}

#[test]
fn fig9_preset_reports_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig9.csv");
    let (code, _, err) = iacsi(&["preset", "fig9", "--output", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(meta_path(&out)).unwrap()).unwrap();
    assert!(meta["results"]["largeb_slope_error"].as_f64().unwrap() < 1e-9);
    assert!((meta["results"]["expected_slope"].as_f64().unwrap() - 1.0 / 7.0).abs() < 1e-15);
}
