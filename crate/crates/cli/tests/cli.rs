use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn megastable(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_megastable"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .env_remove("MEGASTABLE_OUT")
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_lands_on_ground_orbit() {
    let dir = TempDir::new().unwrap();
    let o = megastable(dir.path(), r#"{"x0": 1.0, "t_final": 600}"#, &["simulate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = read_json(&dir.path().join("out/summary.json"));
    assert_eq!(summary["settled"], Value::Bool(true));
    assert_eq!(summary["orbit"], 0);
    let traj = fs::read_to_string(dir.path().join("out/trajectory.csv")).unwrap();
    let mut lines = traj.lines();
    assert!(lines.next().unwrap().starts_with("# generated"));
    assert_eq!(lines.next(), Some("t,x,y"));
    assert!(lines.count() >= 60_001);
    assert!(dir.path().join("out/simulate.gp").exists());
}

#[test]
fn undelayed_run_reports_no_orbit() {
    let dir = TempDir::new().unwrap();
    let o = megastable(
        dir.path(),
        r#"{"tau0": 0}"#,
        &["simulate", "--deterministic", "--no-plot"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = read_json(&dir.path().join("out/summary.json"));
    assert_eq!(summary["classification"], "no orbit");
    assert!(summary["orbit"].is_null());
    assert!(summary.get("generated").is_none());
    assert!(!dir.path().join("out/simulate.gp").exists());
}

#[test]
fn malformed_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let o = megastable(dir.path(), r#"{"tau0": 0.8,"#, &["simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let o = megastable(dir.path(), r#"{"tau": 0.8}"#, &["simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));

    let o = megastable(dir.path(), r#"{"m": -1}"#, &["simulate"]);
    assert_eq!(o.status.code(), Some(2));

    let o = megastable(dir.path(), r#"{"F0": 1, "N": 2}"#, &["transition"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Omega"), "{}", stderr(&o));
}

#[test]
fn divergence_exits_1_with_time() {
    let dir = TempDir::new().unwrap();
    let o = megastable(dir.path(), r#"{"k": 1000, "step": 0.5}"#, &["simulate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("diverged") && stderr(&o).contains("t = "),
        "{}",
        stderr(&o)
    );
}

#[test]
fn catalog_fit_and_determinism() {
    let dir = TempDir::new().unwrap();
    let run = || {
        let o = megastable(
            dir.path(),
            r#"{"n_max": 10}"#,
            &["catalog", "--deterministic"],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        (
            fs::read(dir.path().join("out/catalog.csv")).unwrap(),
            fs::read(dir.path().join("out/fit.json")).unwrap(),
        )
    };
    let first = run();
    assert_eq!(first, run());
    assert_eq!(String::from_utf8_lossy(&first.0).lines().count(), 12);
    let fit: Value = serde_json::from_slice(&first.1).unwrap();
    let a = fit["a"].as_f64().unwrap();
    assert!((19.0..=23.0).contains(&a), "a = {a}");
}

#[test]
fn single_orbit_catalog_refuses_fit() {
    let dir = TempDir::new().unwrap();
    let o = megastable(
        dir.path(),
        r#"{"n_max": 0}"#,
        &["catalog", "--deterministic"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("fit refused"));
    let csv = fs::read_to_string(dir.path().join("out/catalog.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(!dir.path().join("out/fit.json").exists());
}

#[test]
fn unforced_transition_keeps_orbit() {
    let dir = TempDir::new().unwrap();
    let o = megastable(
        dir.path(),
        r#"{"tau0": 0.82, "n_max": 8, "initial_n": 4, "F0": 0, "Omega": 0.59, "N": 5}"#,
        &["transition", "--export-trajectory", "--deterministic"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&dir.path().join("out/transition.json"));
    assert_eq!(r["final_n"], 4);
    assert_eq!(r["pulse"]["F0"], 0.0);
    assert_eq!(r["pulse"]["N"], 5);
    assert!(dir.path().join("out/trajectory.csv").exists());
    assert!(dir.path().join("out/transition.gp").exists());
}

#[test]
fn sweep_output_independent_of_jobs() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"tau0": 0.82, "n_max": 12, "Omega": 0.58, "N": 5, "mode": "omega",
                  "F0_values": [0, 1, 2, 3, 4]}"#;
    let run = |jobs: &str| {
        // The flag overrides the configured mode.
        let o = megastable(
            dir.path(),
            cfg,
            &[
                "sweep",
                "--mode",
                "amplitude",
                "--jobs",
                jobs,
                "--deterministic",
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(dir.path().join("out/sweep.csv")).unwrap()
    };
    let one = run("1");
    assert_eq!(one, run("3"));
    let text = String::from_utf8(one).unwrap();
    assert!(text.starts_with("F0,Omega,N,initial_n,final_n,Q,settled\n"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn grid_sweep_writes_matrix() {
    let dir = TempDir::new().unwrap();
    let o = megastable(
        dir.path(),
        r#"{"tau0": 0.82, "n_max": 12, "t0": 200, "t_a": 400, "mode": "grid",
            "F0_values": [1, 3], "N_values": {"min": 1, "max": 2}}"#,
        &["sweep"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let sweep = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert!(sweep.starts_with("# generated"));
    let matrix = fs::read_to_string(dir.path().join("out/matrix.csv")).unwrap();
    let rows: Vec<&str> = matrix.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("# generated"));
    assert!(rows[1].starts_with("N\\F0,"));
    let manifest = read_json(&dir.path().join("out/manifest.json"));
    assert_eq!(manifest["axes"][1]["name"], "N");
    assert!((manifest["fixed"]["Omega"].as_f64().unwrap() - 0.35f64.sqrt()).abs() < 1e-12);
}

#[test]
fn sweep_without_mode_or_grid_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = megastable(dir.path(), r#"{"F0": 1, "N": 2}"#, &["sweep"]);
    assert_eq!(o.status.code(), Some(2));
    let o = megastable(
        dir.path(),
        r#"{"F0": 1, "N": 2}"#,
        &["sweep", "--mode", "omega"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Omega_values"));
    let o = megastable(
        dir.path(),
        r#"{"F0": 1, "N": 2, "Omega_values": [0.6, 0.5]}"#,
        &["sweep", "--mode", "omega"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_root_from_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, r#"{"t_final": 50}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_megastable"))
        .args(["simulate", "--config"])
        .arg(&cfg)
        .env("MEGASTABLE_OUT", dir.path().join("env-out"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("env-out/summary.json").exists());
}
