use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sfwr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfwr"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn design_worked_example() {
    let tmp = tempfile::tempdir().unwrap();
    let v = json(&sfwr(
        tmp.path(),
        &[
            "design", "--lmin", "20", "--lmax", "180", "--vp", "2e8", "--ur", "0.01", "--json",
        ],
    ));
    assert_eq!(v["plan"]["burst_samples"], 200);
    assert_eq!(v["plan"]["period_samples"], 2000);
    assert_eq!(v["plan"]["f0_hz"], 10e6);
    let fmax = v["f_max_required_hz"].as_f64().unwrap();
    assert!((fmax - 55.555_555e6).abs() < 1e3, "{fmax}");
    assert!(tmp.path().join("plan.toml").exists());
}

#[test]
fn design_from_config_matches_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[design]\nl_min = 20.0\nl_max = 180.0\nvp = 2e8\nur = 0.01\n",
    );
    let a = json(&sfwr(tmp.path(), &["--config", &cfg, "design", "--json"]));
    let b = json(&sfwr(
        tmp.path(),
        &[
            "design", "--lmin", "20", "--lmax", "180", "--vp", "2e8", "--ur", "0.01", "--json",
        ],
    ));
    assert_eq!(a["plan"], b["plan"]);
}

#[test]
fn infeasible_design_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sfwr(
        tmp.path(),
        &[
            "design", "--lmin", "0.001", "--lmax", "180", "--vp", "2e8", "--ur", "0.01",
        ],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn reference_round_trip_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let sim = json(&sfwr(dir, &["--out", "ref", "simulate", "--json"]));
    assert_eq!(sim["segments"], 101);
    assert_eq!(sim["samples"], 202_000);
    assert!(dir.join("ref/transmitted.csv").exists());
    let ch = json(&sfwr(
        dir,
        &[
            "--out",
            "ref",
            "characterize",
            "--signal",
            "ref/received.csv",
            "--length",
            "50",
            "--json",
        ],
    ));
    assert!(ch["model_alpha_rel_max"].as_f64().unwrap() <= 1.5e-3);
    assert!(ch["model_beta_rel_max"].as_f64().unwrap() <= 5e-4);
    let table = fs::read_to_string(dir.join("ref/propagation.csv")).unwrap();
    assert!(table.starts_with("f_hz,alpha_np_per_m,beta_rad_per_m"));
    assert_eq!(table.lines().count(), 102);
}

#[test]
fn constant_gamma_location_from_characterized_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    json(&sfwr(dir, &["--out", "ref", "simulate", "--format", "bin", "--json"]));
    json(&sfwr(
        dir,
        &[
            "--out",
            "ref",
            "characterize",
            "--signal",
            "ref/received.bin",
            "--length",
            "50",
            "--json",
        ],
    ));
    let cfg = write_config(
        dir,
        "[scenario]\ntype = \"termination\"\nlength = 100.0\nimpedance = { type = \"resistor\", ohms = 10.0 }\n",
    );
    json(&sfwr(dir, &["--config", &cfg, "--out", "z10", "simulate", "--json"]));
    let report = json(&sfwr(
        dir,
        &[
            "--config",
            &cfg,
            "--out",
            "z10",
            "locate",
            "--signal",
            "z10/received.csv",
            "--propagation",
            "ref/propagation.csv",
            "--const-gamma",
            "--json",
        ],
    ));
    assert_eq!(report["method"], "constant_gamma");
    let l = report["position_m"].as_f64().unwrap();
    assert!((l / 100.0 - 1.0).abs() < 5e-3, "{l}");
    // |Γ| = 40/60 on a nominal 50 Ω line
    let g = report["gamma_mag"].as_f64().unwrap();
    assert!((g - 2.0 / 3.0).abs() < 0.02, "{g}");
    assert!((report["gamma_phase_deg"].as_f64().unwrap().abs() - 180.0).abs() < 2.0);
    let saved: Value = serde_json::from_str(&fs::read_to_string(dir.join("z10/report.json")).unwrap()).unwrap();
    assert_eq!(saved, report);
}

#[test]
fn generic_location_of_capacitive_fault() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "[scenario]\ntype = \"capacitive_fault\"\nfarads = 100e-12\nposition = 55.0\ncable_length = 100.0\n",
    );
    json(&sfwr(dir, &["--config", &cfg, "simulate", "--json"]));
    let report = json(&sfwr(
        dir,
        &["--config", &cfg, "locate", "--signal", "received.csv", "--json"],
    ));
    assert_eq!(report["method"], "generic");
    let e = report["position_m"].as_f64().unwrap() / 55.0 - 1.0;
    assert!((3e-3..=9e-3).contains(&e), "{e}");
    assert_eq!(report["gamma_mag"].as_array().unwrap().len(), 101);
    assert!(report["gamma_phase_deg"].is_null());
    let curve = fs::read_to_string(dir.join("location_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 102);
}

#[test]
fn matched_termination_reflects_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(
        dir,
        "[scenario]\ntype = \"termination\"\nlength = 50.0\nimpedance = { type = \"matched\" }\n",
    );
    let sim = json(&sfwr(dir, &["--config", &cfg, "simulate", "--json"]));
    assert!(sim["reflected_rms"].as_f64().unwrap() < 1e-12);
    let out = sfwr(dir, &["--config", &cfg, "locate", "--signal", "received.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no reflection"));
}

#[test]
fn seeded_simulation_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write_config(dir, "[noise]\nstd_dev = 1e-3\n");
    for (out, seed) in [("a", "5"), ("b", "5"), ("c", "6")] {
        json(&sfwr(
            dir,
            &["--config", &cfg, "--seed", seed, "--out", out, "simulate", "--json"],
        ));
    }
    let read = |d: &str| fs::read(dir.join(d).join("received.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn repro_table1_passes_and_fig10_writes_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let v = json(&sfwr(dir, &["repro", "table1", "--json"]));
    assert_eq!(v["passed"], true);
    assert_eq!(v["studies"][0]["rows"].as_array().unwrap().len(), 5);
    let out = sfwr(dir, &["--out", "figs", "repro", "fig10"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[PASS] max |Gamma rel err|"));
    assert!(dir.join("figs/fig10_gamma.csv").exists());
}

#[test]
fn repro_exit_code_tracks_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let strict = include_str!("../tolerances.toml").replace("table1_phase_deg = 0.1", "table1_phase_deg = 1e-9");
    fs::write(dir.join("strict.toml"), strict).unwrap();
    let out = sfwr(dir, &["--tolerances", "strict.toml", "repro", "table1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL]"));
    let out = sfwr(dir, &["repro", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_of_range_scenario_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[scenario]\ntype = \"reference\"\nlength = 400.0\n");
    let out = sfwr(tmp.path(), &["--config", &cfg, "simulate"]);
    assert!(!out.status.success());
}
