use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lobfit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lobfit")).current_dir(dir).args(args).output().expect("run lobfit")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn without_timings(mut v: Value) -> Value {
    lobfit::report::strip_timing(&mut v);
    v
}

#[test]
fn simulate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    for d in ["a", "b"] {
        let o = lobfit(tmp.path(), &["simulate", "--preset", "smith", "--events", "1000", "--seed", "7", "--out", d]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["quotes.csv", "trades.csv"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    let mut ma = json(&tmp.path().join("a/manifest.json"));
    let mut mb = json(&tmp.path().join("b/manifest.json"));
    ma["config"]["out"] = Value::Null;
    mb["config"]["out"] = Value::Null;
    assert_eq!(ma, mb);
}

#[test]
fn zero_events_give_header_only_files() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lobfit(tmp.path(), &["simulate", "--events", "0", "--out", "z"]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(tmp.path().join("z/quotes.csv")).unwrap(), "ts_ns,bid_px,bid_sz,ask_px,ask_sz\n");
    assert_eq!(std::fs::read_to_string(tmp.path().join("z/trades.csv")).unwrap(), "ts_ns,px,sz\n");
}

#[test]
fn manifest_counts_market_orders() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lobfit(tmp.path(), &["simulate", "--events", "10000", "--seed", "1", "--out", "m"]);
    assert_eq!(code(&o), 0);
    let m = json(&tmp.path().join("m/manifest.json"));
    assert_eq!(m["schema_version"], lobfit::report::SCHEMA_VERSION);
    assert!(m["result"]["event_counts"]["BMO"].as_u64().unwrap() > 0);
    assert_eq!(m["result"]["events_simulated"], 10000);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&lobfit(tmp.path(), &["simulate", "--events", "20000", "--seed", "2", "--out", "d"])), 0);
    let o = lobfit(tmp.path(), &["estimate", "--data", "d", "--time-limit", "0", "--output", "e.json"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&lobfit(tmp.path(), &["select", "--data", "d", "--time-limit", "0", "--output", "s.json"])), 3);

    assert_eq!(code(&lobfit(tmp.path(), &["simulate", "--events", "60", "--seed", "2", "--out", "tiny"])), 0);
    assert_eq!(code(&lobfit(tmp.path(), &["estimate", "--data", "tiny", "--output", "t.json"])), 2);

    assert_eq!(code(&lobfit(tmp.path(), &["estimate", "--data", "missing"])), 4);
    assert_eq!(code(&lobfit(tmp.path(), &["simulate", "--preset", "bogus"])), 4);
    assert_eq!(code(&lobfit(tmp.path(), &["simulate", "--no-such-flag"])), 4);
    assert_eq!(code(&lobfit(tmp.path(), &["estimate", "--data", "d", "--set", "mode=xyz"])), 4);
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("sim.cfg"), "# smith run\nevents = 500\nseed = 9\nkappa = 0.7\n").unwrap();
    let o = lobfit(tmp.path(), &["simulate", "--config", "sim.cfg", "--seed", "11", "--set", "rho=2", "--out", "c"]);
    assert_eq!(code(&o), 0);
    let cfg = &json(&tmp.path().join("c/manifest.json"))["config"];
    assert_eq!(cfg["events"], "500");
    assert_eq!(cfg["seed"], "11");
    assert_eq!(cfg["kappa"], "0.7");
    assert_eq!(cfg["rho"], "2");
    assert_eq!(cfg["preset"], "smith");
}

#[test]
fn estimate_report_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&lobfit(tmp.path(), &["simulate", "--events", "30000", "--seed", "5", "--out", "d"])), 0);
    for r in ["r1.json", "r2.json"] {
        let o = lobfit(tmp.path(), &["estimate", "--data", "d", "--output", r]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = json(&tmp.path().join("r1.json"));
    let b = json(&tmp.path().join("r2.json"));
    assert_eq!(without_timings(a.clone()), without_timings(b));
    let fit = &a["result"]["fit"];
    assert_eq!(fit["variant"], "S");
    assert_eq!(fit["names"], serde_json::json!(["kappa_0", "rho_0"]));
    assert!(fit["std_errors"].as_array().unwrap().len() == 2);
    assert_eq!(a["config"]["grid_n"], "50");
}

#[test]
fn table_prints_stars() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&lobfit(tmp.path(), &["simulate", "--events", "30000", "--seed", "4", "--out", "d"])), 0);
    let o = lobfit(tmp.path(), &["estimate", "--data", "d", "--table", "--output", "f.json"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("kappa_0") && out.contains("***"), "{out}");
}

#[test]
fn predict_and_compare_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for seed in 0..6 {
        let d = format!("pair{seed}");
        let seed = seed.to_string();
        assert_eq!(code(&lobfit(p, &["simulate", "--events", "30000", "--seed", &seed, "--out", &d])), 0);
        for (variant, list) in [("S", &mut xs), ("T1", &mut ys)] {
            let fit = format!("{d}/{variant}_fit.json");
            let pred = format!("{d}/{variant}_pred.json");
            let o = lobfit(p, &["estimate", "--data", &d, "--variant", variant, "--output", &fit]);
            assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
            let o = lobfit(p, &["predict", "--fit", &fit, "--label", &d, "--output", &pred]);
            assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
            let r = json(&p.join(&pred));
            assert_eq!(r["result"]["label"], d.as_str());
            assert!(r["result"]["prediction"]["p_m"].as_f64().unwrap() < 1.0);
            list.push(pred);
        }
    }
    let mut args = vec!["compare", "--output", "w.json", "--x"];
    args.extend(xs.iter().map(String::as_str));
    args.push("--y");
    args.extend(ys.iter().map(String::as_str));
    let o = lobfit(p, &args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let w = json(&p.join("w.json"));
    let pv = w["result"]["test"]["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&pv));
    assert!(w["result"]["test"]["median_x"].is_number());

    // identical pairs: no signal
    let mut same = vec!["compare", "--output", "same.json", "--x"];
    same.extend(xs.iter().map(String::as_str));
    same.push("--y");
    same.extend(xs.iter().map(String::as_str));
    assert_eq!(code(&lobfit(p, &same)), 0);
    assert_eq!(json(&p.join("same.json"))["result"]["test"]["p_value"], 1.0);

    // unpaired labels are listed
    let mut bad = vec!["compare", "--output", "bad.json", "--x"];
    bad.extend(xs[..5].iter().map(String::as_str));
    bad.push("--y");
    bad.extend(ys[1..].iter().map(String::as_str));
    let o = lobfit(p, &bad);
    assert_eq!(code(&o), 4);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("pair0") && err.contains("pair5"), "{err}");
}

#[test]
fn gzi_pipeline_and_matching() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path();
    let o = lobfit(
        p,
        &["simulate", "--gzi", "--events", "40000", "--seed", "8", "--set", "eta=0.8", "--set", "mo_volume_law=0.6,0.3,0.1", "--out", "g"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&lobfit(p, &["match", "--data", "g", "--output", "m.json"])), 0);
    let m = json(&p.join("m.json"));
    assert!(m["result"]["match_rate"].as_f64().unwrap() > 0.9);
    let o = lobfit(p, &["estimate", "--data", "g", "--mode", "gzi", "--output", "gf.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let f = json(&p.join("gf.json"));
    assert_eq!(f["result"]["fit"]["mode"], "gzi");
    assert!(f["result"]["fit"]["params"]["eta"].as_f64().is_some());
}
