//! End-to-end tests of the `qubot` binary: exit codes, artifact contents
//! and configuration layering.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qubot_cli::config::RunConfig;
use tempfile::TempDir;

fn qubot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qubot"))
        .args(args)
        .env_remove("QUBOT_SIM_WORKERS")
        .output()
        .expect("spawn qubot")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

fn files_in(dir: &Path) -> Vec<String> {
    match fs::read_dir(dir) {
        Ok(entries) => entries
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect(),
        Err(_) => Vec::new(),
    }
}

/// Column `name` of a CSV with a header row, parsed as numbers.
fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(k).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn malformed_config_exits_1_without_output() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "{ \"seed\": 3, ");
    for sub in ["landscape", "simulate"] {
        let o = qubot(&[sub, "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 1, "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(files_in(&out).is_empty());
    }
}

#[test]
fn unknown_key_exits_1_and_names_it() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), r#"{"simulation": {"gamma_hz": 100}}"#);
    let o = qubot(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma_hz"));
    assert!(files_in(&out).is_empty());
}

#[test]
fn invalid_value_and_bad_flag_exit_1() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), r#"{"simulation": {"dt_s": -1e-6}}"#);
    let o = qubot(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&qubot(&["simulate", "--preset", "nonexistent"])), 1);
    assert_eq!(code(&qubot(&["simulate", "--trajectories", "0"])), 1);
    assert!(files_in(&out).is_empty());
}

#[test]
fn empty_sweep_list_exits_1() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), r#"{"sweep": {"nbar": []}}"#);
    let o = qubot(&[
        "sweep",
        "temperature",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(files_in(&out).is_empty());
}

#[test]
fn logical_check_passes_and_injected_error_exits_3() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("ok");
    let o = qubot(&["logical-check", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(out.join("logical_check.json").exists());

    let bad = tmp.path().join("bad");
    let o = qubot(&[
        "logical-check",
        "--inject-sign-error",
        "--out",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL]"));
}

#[test]
fn landscape_reports_preset_claims() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("c");
    let o = qubot(&[
        "landscape",
        "--preset",
        "paper_appendix_c",
        "--check",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("landscape.json")).unwrap()).unwrap();
    assert_eq!(json["results"]["protected_state_suggestion"], "phi-");
    assert!(out.join("landscape.csv").exists());
}

#[test]
fn summary_config_round_trips() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        r#"{"seed": 17, "simulation": {"t_final_s": 0.002, "steady_state_start_s": 0.001, "kappa": 1500.0}}"#,
    );
    let o = qubot(&[
        "simulate",
        "--config",
        &cfg,
        "--trajectories",
        "4",
        "--workers",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let echoed: RunConfig = serde_json::from_value(summary["config"].clone()).unwrap();
    assert_eq!(echoed.seed, 17);
    assert_eq!(echoed.trajectories, 4);
    assert_eq!(echoed.workers, Some(2));
    assert_eq!(echoed.simulation.t_final_s, 0.002);

    // Feeding the echoed configuration back reproduces the run exactly.
    let again = tmp.path().join("again");
    let echoed_path = tmp.path().join("echoed.json");
    fs::write(
        &echoed_path,
        serde_json::to_string(&summary["config"]).unwrap(),
    )
    .unwrap();
    let o = qubot(&[
        "simulate",
        "--config",
        echoed_path.to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read(out.join("simulate.csv")).unwrap(),
        fs::read(again.join("simulate.csv")).unwrap()
    );
}

#[test]
fn zero_gamma_keeps_full_overlap() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    // Correctors far outside the wavepacket: nothing can leave |φ⁺⟩.
    let cfg = write_config(
        tmp.path(),
        r#"{"simulation": {"gamma_per_s": 0.0, "r_l1_um": 3.0, "r_l2_um": -3.0, "t_final_s": 0.005, "steady_state_start_s": 0.002}}"#,
    );
    let o = qubot(&[
        "simulate",
        "--config",
        &cfg,
        "--trajectories",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("simulate.csv")).unwrap();
    let f = column(&csv, "F");
    assert!(!f.is_empty());
    assert!(f.iter().all(|v| (v - 1.0).abs() < 1e-12), "{f:?}");
    assert!(column(&csv, "F_free").iter().all(|v| *v == 1.0));
}

#[test]
fn worker_count_does_not_change_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"simulation": {"t_final_s": 0.004, "steady_state_start_s": 0.002, "write_trajectories": true}}"#,
    );
    let mut outputs = Vec::new();
    for workers in ["1", "3"] {
        let out = tmp.path().join(format!("w{workers}"));
        let o = qubot(&[
            "simulate",
            "--config",
            &cfg,
            "--trajectories",
            "12",
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
        outputs.push((
            fs::read(out.join("simulate.csv")).unwrap(),
            fs::read(out.join("trajectories.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn csv_numbers_carry_full_precision() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        r#"{"sweep": {"nbar": [0.0, 0.5]}, "simulation": {"t_final_s": 0.012}}"#,
    );
    let o = qubot(&[
        "sweep",
        "temperature",
        "--config",
        &cfg,
        "--trajectories",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep_temperature.csv")).unwrap();
    assert!(csv.starts_with("nbar,F_s,F_s_err,gamma_s,gamma_s_err,gL1_s,gL2_s\n"));
    let first = csv.lines().nth(1).unwrap();
    let mantissa = first.split(',').next().unwrap().split('e').next().unwrap();
    assert_eq!(mantissa.len(), "0.0000000000000000".len());
    assert_eq!(column(&csv, "nbar"), vec![0.0, 0.5]);
}
