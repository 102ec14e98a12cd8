use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use flockalign::config::parse_config;
use flockalign::diagnostics::read_series;
use flockalign::runner::{run_sweep, SweepSummary};

const PAIR: &str = "mode = agents
kernel.variant = constant
initial.preset = pair
agents.count = 2
time.t_final = 1
time.dt = 0.01
time.record_every = 10
";

fn flockalign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flockalign")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn agents_run_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), PAIR);
    let out = tmp.path().join("out");
    let o = flockalign(&["agents", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.txt", "series.csv", "summary.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["outcome"], "smooth");
    assert!(summary["flocking"]["predicted_rate"].as_f64().unwrap() > 0.0);
    // the written config parses back to the same run
    let again = parse_config(&fs::read_to_string(out.join("config.txt")).unwrap()).unwrap();
    assert_eq!(again, parse_config(PAIR).unwrap());
}

#[test]
fn series_matches_golden_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), PAIR);
    let out = tmp.path().join("out");
    assert!(flockalign(&["agents", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let got = read_series(fs::read(out.join("series.csv")).unwrap().as_slice()).unwrap();
    let golden = read_series(include_str!("golden/pair_series.csv").as_bytes()).unwrap();
    assert_eq!(got.records.len(), golden.records.len());
    for (a, b) in got.records.iter().zip(&golden.records) {
        assert!((a.t - b.t).abs() < 1e-12);
        let (x, y) = (a.delta_u.unwrap(), b.delta_u.unwrap());
        assert!((x - y).abs() <= 1e-12 * y.abs(), "t = {}: {x} vs {y}", a.t);
    }
}

#[test]
fn seed_override_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mode = agents\nkernel.variant = gaussian\ninitial.preset = random\nagents.count = 20\ntime.t_final = 0.2\n");
    let digest = |seed: &str, name: &str| {
        let out = tmp.path().join(name);
        let o = flockalign(&["agents", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success());
        let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
        s["series_sha256"].as_str().unwrap().to_string()
    };
    assert_eq!(digest("3", "a"), digest("3", "b"));
    assert_ne!(digest("3", "a"), digest("4", "c"));
}

#[test]
fn validation_errors_exit_2_with_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mode = agents\nkernel.variant = pareto\nkernel.params.theta = 1.5\ninitial.preset = random\n");
    let o = flockalign(&["agents", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");

    let o = flockalign(&["euler1d", "--config", &write_config(tmp.path(), PAIR)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_exits_4() {
    let o = flockalign(&["agents", "--config", "/definitely/not/here.cfg"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn blow_up_exits_3_with_sentinel() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "mode = euler1d\nkernel.variant = constant\ngrid.nx = 128\ninitial.preset = slope_sine\ninitial.params.slope_ratio = -1.5\ntime.t_final = 5\n",
    );
    let out = tmp.path().join("out");
    let o = flockalign(&["euler1d", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let series = read_series(fs::read(out.join("series.csv")).unwrap().as_slice()).unwrap();
    let t = series.blowup_at.expect("sentinel row");
    assert!(t > 0.0 && t < 5.0);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["outcome"], "blow_up");
}

#[test]
fn euler_run_snapshots_and_monitor() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "mode = euler1d\nkernel.variant = constant\ngrid.nx = 64\ninitial.preset = slope_sine\ntime.t_final = 0.5\neuler.snapshot_every = 2\neuler.tracers = 4\n",
    );
    let out = tmp.path().join("out");
    assert!(flockalign(&["euler1d", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let snap = fs::read_to_string(out.join("fields_0.000000.csv")).unwrap();
    assert!(snap.starts_with("x,rho,u\n"));
    assert_eq!(snap.lines().count(), 65);
    assert!(out.join("fields_0.500000.csv").exists());
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["monitor"]["eta_ok"], true);
    assert!(s["tracer_deviation"].as_f64().is_some());

    let o = flockalign(&["certify", "--config", &cfg, "--monitor", out.to_str().unwrap()]);
    assert!(o.status.success());
    let m: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(m["certificate"]["subcritical"], true);
    assert!(m["monitor"]["eta_violation"].is_null());
}

#[test]
fn kinetic_run_writes_h_balance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "mode = kinetic\nkernel.variant = gaussian\nkernel.params.length = 0.3\nphase.nx = 16\nphase.nv = 32\nphase.sigma = 0.5\ninitial.preset = maxwellian\ntime.t_final = 0.1\ntime.record_interval = 0.02\n",
    );
    let out = tmp.path().join("out");
    let o = flockalign(&["kinetic", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let hb = fs::read_to_string(out.join("h_balance.csv")).unwrap();
    assert!(hb.starts_with("t,h,production,dissipation,mass,momentum,dh_dt,residual\n"));
    assert_eq!(hb.lines().count(), 7);
    assert!(out.join("f_0.100000.csv").exists());
}

#[test]
fn certify_prints_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "mode = euler1d\nkernel.variant = constant\ninitial.preset = uniform\n");
    let o = flockalign(&["certify", "--config", &cfg]);
    assert!(o.status.success());
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["eta_c"], 0.5);
    assert_eq!(r["gamma0"], 0.25);
}

fn sweep(integrator: &str) -> SweepSummary {
    let text = format!(
        "mode = sweep\nsystem = agents\nkernel.variant = constant\ninitial.preset = pair\nagents.count = 2\ntime.t_final = 1\ntime.record_every = 1\ntime.integrator = {integrator}\nsweep.axis = time.dt\nsweep.values = [0.1, 0.05, 0.025, 0.0125]\n"
    );
    let cfg = parse_config(&text).unwrap();
    let sw = cfg.sweep.clone().unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let s = run_sweep(&cfg, &sw.axis, &sw.values, tmp.path()).unwrap();
    assert!(tmp.path().join("sweep.csv").exists() && tmp.path().join("run_003/series.csv").exists());
    s
}

#[test]
fn sweep_richardson_orders() {
    let fe = sweep("forward_euler");
    assert_eq!(fe.orders.len(), 2);
    for o in &fe.orders {
        assert!((o.order - 1.0).abs() < 0.1, "forward Euler order {}", o.order);
    }
    let rk = sweep("rk4");
    for o in &rk.orders {
        assert!((o.order - 4.0).abs() < 0.3, "RK4 order {}", o.order);
    }
    assert!(rk.rows.iter().all(|r| r.outcome == "smooth"));
}

#[test]
fn empty_sweep_gives_empty_summary() {
    let cfg = parse_config("mode = sweep\nsystem = agents\nkernel.variant = constant\ninitial.preset = pair\nsweep.axis = kernel.tau\nsweep.values = []\n").unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let s = run_sweep(&cfg, "kernel.tau", &[], tmp.path()).unwrap();
    assert!(s.rows.is_empty() && s.orders.is_empty());
    assert_eq!(fs::read_to_string(tmp.path().join("sweep.csv")).unwrap().lines().count(), 1);
}

#[test]
fn failing_sweep_member_is_reported() {
    let cfg = parse_config("mode = sweep\nsystem = agents\nkernel.variant = constant\ninitial.preset = pair\nagents.count = 2\ntime.t_final = 0.1\nsweep.axis = kernel.tau\nsweep.values = [1, -1]\n").unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let s = run_sweep(&cfg, "kernel.tau", &[1.0, -1.0], tmp.path()).unwrap();
    assert_eq!(s.rows[0].outcome, "smooth");
    assert_eq!(s.rows[1].outcome, "failed");
    assert!(s.rows[1].error.is_some());
}
