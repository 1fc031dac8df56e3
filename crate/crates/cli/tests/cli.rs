use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn stringfx(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stringfx"))
        .current_dir(dir)
        .env_remove("STRINGFX_DATA_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).expect("summary written")).unwrap()
}

fn write_series(path: &Path, values: &[f64]) {
    let mut s = String::from("index,price\n");
    for (i, v) in values.iter().enumerate() {
        s.push_str(&format!("{i},{v}\n"));
    }
    fs::write(path, s).unwrap();
}

fn wave(n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 + (k as f64 * 0.3).sin() + 0.01 * k as f64).collect()
}

#[test]
fn metrics_on_identical_files_is_zero() {
    let d = tempfile::tempdir().unwrap();
    write_series(&d.path().join("a.csv"), &wave(20));
    let out = stringfx(d.path(), &["metrics", "--actual", "a.csv", "--forecast", "a.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(d.path());
    assert_eq!(s["status"], "ok");
    assert_eq!(s["results"]["mae"], 0.0);
}

#[test]
fn missing_input_is_usage_error_with_summary() {
    let d = tempfile::tempdir().unwrap();
    let out = stringfx(d.path(), &["forecast", "--input", "absent.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let s = summary(d.path());
    assert_eq!(s["status"], "error");
    assert_eq!(s["exit_code"], 2);
}

#[test]
fn bad_quotes_are_data_errors() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("t.csv"), "timestamp_ms,bid,ask\n0,1.0,1.1\n1000,1.2,1.1\n").unwrap();
    fs::write(d.path().join("s.csv"), "index,direction\n0,long\n").unwrap();
    let out = stringfx(d.path(), &["backtest", "--ticks", "t.csv", "--signals", "s.csv"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn flat_window_is_numeric_error() {
    let d = tempfile::tempdir().unwrap();
    write_series(&d.path().join("flat.csv"), &[1.5; 8]);
    let out = stringfx(d.path(), &["transform", "--input", "flat.csv", "--map", "standardize", "--ls", "4"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn flags_override_config_and_outputs_are_deterministic() {
    let d = tempfile::tempdir().unwrap();
    write_series(&d.path().join("w.csv"), &wave(60));
    fs::write(d.path().join("run.ini"), "q = 0.5\n[forecast]\nls = 4\neta1 = 0.2\n").unwrap();
    let args = ["--config", "run.ini", "forecast", "--input", "w.csv", "--ls", "6", "--output", "f.csv"];
    assert_eq!(stringfx(d.path(), &args).status.code(), Some(0));
    let params = &summary(d.path())["results"]["params"]["Direct"];
    assert_eq!(params["ls"], 6);
    assert_eq!(params["q"], 0.5);
    assert_eq!(params["eta1"], 0.2);
    let first = fs::read(d.path().join("f.csv")).unwrap();
    let first_summary = fs::read(d.path().join("summary.json")).unwrap();
    assert_eq!(stringfx(d.path(), &args).status.code(), Some(0));
    assert_eq!(first, fs::read(d.path().join("f.csv")).unwrap());
    assert_eq!(first_summary, fs::read(d.path().join("summary.json")).unwrap());
}

#[test]
fn data_dir_resolves_relative_inputs() {
    let data = tempfile::tempdir().unwrap();
    let work = tempfile::tempdir().unwrap();
    write_series(&data.path().join("w.csv"), &wave(30));
    let out = Command::new(env!("CARGO_BIN_EXE_stringfx"))
        .current_dir(work.path())
        .env("STRINGFX_DATA_DIR", data.path())
        .args(["transform", "--input", "w.csv", "--map", "string2", "--ls", "5", "--q", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(work.path().join("transform.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(csv.lines().nth(1).unwrap().ends_with(",0"));
}

#[test]
fn optimize_is_independent_of_worker_count() {
    let d = tempfile::tempdir().unwrap();
    write_series(&d.path().join("w.csv"), &wave(50));
    fs::write(d.path().join("g.txt"), "ls = 2, 3, 4\nq = 0.3, 1\neta1 = -0.4, 0.8\neta2 = 0\n").unwrap();
    let run = |workers: &str, out: &str| {
        let o = stringfx(
            d.path(),
            &["--workers", workers, "optimize", "--input", "w.csv", "--grid", "g.txt", "--objective", "trading", "--max-drawdown", "5", "--output", out, "--fix", "eta1=0.8"],
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(d.path().join(out)).unwrap()
    };
    assert_eq!(run("1", "serial.csv"), run("4", "parallel.csv"));
    let s = summary(d.path());
    assert_eq!(s["results"]["evaluations"], 12);
    assert!(s["results"]["best"]["metrics"]["max_drawdown_pct"].as_f64().unwrap() <= 5.0);
    let surface = fs::read_to_string(d.path().join("surface.csv")).unwrap();
    assert_eq!(surface.lines().next(), Some("ls,q,objective"));
    assert_eq!(surface.lines().count(), 1 + 3 * 2);
}

#[test]
fn max_drawdown_needs_trading_objective() {
    let d = tempfile::tempdir().unwrap();
    write_series(&d.path().join("w.csv"), &wave(50));
    fs::write(d.path().join("g.txt"), "ls = 2\nq = 1\n").unwrap();
    let o = stringfx(d.path(), &["optimize", "--input", "w.csv", "--grid", "g.txt", "--max-drawdown", "5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pmbcs_signals_feed_backtest() {
    let d = tempfile::tempdir().unwrap();
    let pm = [
        "--seed", "7", "pmbcs", "--synthetic", "2500", "--learn-len", "1500", "--trade-len", "500", "--ls", "30", "--horizon", "30",
        "--bins", "20", "--min-occupancy", "5", "--d-threshold", "0", "--rho-min", "1.1",
    ];
    let o = stringfx(d.path(), &pm);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(d.path());
    assert_eq!(s["results"]["windows"].as_array().unwrap().len(), 2);
    let trades = s["results"]["backtest"]["trades"].as_u64().unwrap();

    let o = stringfx(d.path(), &["backtest", "--ticks", "ticks.csv", "--signals", "signals.csv", "--horizon", "30", "--out-dir", "bt"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let b = serde_json::from_str::<Value>(&fs::read_to_string(d.path().join("bt/summary.json")).unwrap()).unwrap();
    // trading the full tick file with the same signals sees the same trades
    assert_eq!(b["results"]["report"]["trades"].as_u64().unwrap(), trades);
    let header = fs::read_to_string(d.path().join("bt/trades.csv")).unwrap();
    assert!(header.starts_with("open_idx,close_idx,dir,open_px,close_px,units,pnl"));
}

#[test]
fn reproduce_sinusoid_prints_table() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("g.txt"), "ls = 2, 3, 5\nq = 0.3\neta1 = 0.8\neta2 = -0.2\n").unwrap();
    let o = stringfx(d.path(), &["reproduce-sinusoid", "--grid", "g.txt"]);
    assert_eq!(o.status.code(), Some(0));
    let table = String::from_utf8(o.stdout).unwrap();
    for method in ["naive", "direct", "iterated"] {
        assert!(table.contains(method));
    }
    let s = summary(d.path());
    assert_eq!(s["results"]["report"]["rows"].as_array().unwrap().len(), 8);
}

#[test]
fn version_flag() {
    let d = tempfile::tempdir().unwrap();
    let o = stringfx(d.path(), &["--version"]);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("stringfx "));
}
