use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cryptosim")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn ohlcv(path: &Path, days: u64, seed: u64) {
    let start = chrono::NaiveDate::from_ymd_opt(2020, 3, 1).unwrap();
    let mut text = String::from("date,open,high,low,close,volume\n");
    let mut close = 20.0;
    let mut state = seed;
    for d in 0..days {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let u = (state >> 11) as f64 / (1u64 << 53) as f64;
        let open = close;
        close *= 1.0 + 0.04 * (u - 0.5);
        let volume = 100.0 + 900.0 * u;
        text.push_str(&format!("{},{open},{},{},{close},{volume}\n", start + chrono::Days::new(d), open.max(close), open.min(close)));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn simulate_writes_run_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "agent_count = 40\nhorizon = 60\n").unwrap();
    let msg = ok(&["simulate", "--seed", "3", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(msg.contains("60 steps"));
    let prices = fs::read_to_string(out.join("prices.csv")).unwrap();
    assert!(prices.starts_with("t,asset,P,V,W\n"));
    assert_eq!(prices.lines().count(), 61);
    assert!(out.join("equity.csv").exists());
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 3);
    assert_eq!(meta["mode"], "Learning");

    let noise = tmp.path().join("noise");
    ok(&["simulate", "--noise", "--runs", "2", "--config", cfg.to_str().unwrap(), "--out-dir", noise.to_str().unwrap()]);
    assert!(noise.join("run_000/prices.csv").exists());
    assert!(noise.join("run_001/meta.json").exists());
}

#[test]
fn analyze_flags_short_series_and_compare_is_zero_on_itself() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("XYZ.csv");
    ohlcv(&file, 100, 5);
    let out = tmp.path().join("an");
    let msg = ok(&["analyze", file.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(msg.contains("omitted"), "{msg}");
    for name in ["volatility_365", "return_autocorrelation_90", "return_autocorrelation_365", "volume_autocorrelation_90"] {
        assert!(msg.contains(name), "{name} missing in {msg}");
    }
    // 100 points cover a 90-step volatility window but not two adjacent 90-step windows
    assert!(!msg.contains("volatility_90"));
    assert!(!msg.contains("_14"));
    for table in ["report.json", "returns_histogram.csv", "shifted_correlation.csv", "summary.csv"] {
        assert!(out.join(table).exists(), "{table}");
    }

    let report = out.join("report.json");
    let cmp = tmp.path().join("cmp");
    let r = report.to_str().unwrap();
    let msg = ok(&["compare", r, r, "--out-dir", cmp.to_str().unwrap()]);
    let c: serde_json::Value = serde_json::from_str(&fs::read_to_string(cmp.join("comparison.json")).unwrap()).unwrap();
    assert_eq!(c["aggregate"], 0.0, "{msg}");
    for f in c["families"].as_array().unwrap() {
        assert!(f["distance"].is_null() || f["distance"] == 0.0, "{f}");
    }
}

#[test]
fn analyze_accepts_simulated_prices() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "agent_count = 40\nhorizon = 80\n").unwrap();
    ok(&["simulate", "--config", cfg.to_str().unwrap(), "--out-dir", sim.to_str().unwrap()]);
    let out = tmp.path().join("an");
    let msg = ok(&["analyze", sim.join("prices.csv").to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(msg.starts_with("1 series, 79 returns"), "{msg}");
}

#[test]
fn fundamentals_sensitivity_and_baseline_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    ok(&["fundamentals-stats", "--runs", "3", "--horizon", "400", "--out-dir", dir]);
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("fundamentals_stats.json")).unwrap()).unwrap();
    assert!(stats.to_string().contains("annual_jump_rate"));

    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "agent_count = 40\nhorizon = 60\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    ok(&["sensitivity", "--axis", "zeta", "--values", "1,2", "--runs", "1", "--config", cfg, "--out-dir", dir]);
    let csv = fs::read_to_string(tmp.path().join("sensitivity.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    ok(&["baseline", "--runs", "2", "--config", cfg, "--out-dir", dir]);
    let csv = fs::read_to_string(tmp.path().join("baseline.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(tmp.path().join("baseline_summary.json").exists());
}

#[test]
fn calibrate_smoke_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    fs::create_dir(&data).unwrap();
    for (i, s) in ["A", "B", "C"].iter().enumerate() {
        ohlcv(&data.join(format!("{s}.csv")), 150, i as u64);
    }
    fs::write(data.join("notes.txt"), "ignored").unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "agent_count = 40\nhorizon = 80\n").unwrap();
    let out = tmp.path().join("cal");
    let args = ["calibrate", "--data", data.to_str().unwrap(), "--grid", "smoke", "--budget", "1", "--runs", "1"];
    let msg = ok(&[&args[..], &["--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]].concat());
    assert!(msg.starts_with("1 cells scored"), "{msg}");
    let split = fs::read_to_string(out.join("split.csv")).unwrap();
    assert_eq!(split.matches("train").count(), 2);
    assert_eq!(split.matches("test").count(), 1);
    let records = fs::read_to_string(out.join("records.csv")).unwrap();
    assert!(records.starts_with("rank,agent_count,gesture_scalar,cointegration_accuracy,drawdown_level,aggregate"));
    assert_eq!(records.lines().count(), 2);
    assert!(out.join("timing.csv").exists());
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["simulate", "--runs", "zero"]).status.code(), Some(1));
    assert_eq!(run(&["sensitivity", "--axis", "q", "--values", "1"]).status.code(), Some(1));
    assert_eq!(run(&["analyze", "/nonexistent/file.csv"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
