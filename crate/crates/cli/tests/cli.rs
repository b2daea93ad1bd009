use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hausstraight"))
        .args(args)
        .env_remove("HAUSSTRAIGHT_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn fixture(dir: &Path, name: &str, spec: &str) -> String {
    let path = dir.join(name).to_str().unwrap().to_string();
    let o = run(&["fixtures", "--spec", spec, "--output", &path]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    path
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn segment_is_certified() {
    let dir = tempfile::tempdir().unwrap();
    let seg = fixture(dir.path(), "seg.json", r#"{"kind":"segment","length":10}"#);
    let o = run(&["straight-check", "--input", &seg, "--s", "1", "--rmin", "0.001"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["status"], "certified");
    assert!(v["sup_ratio_bound"].as_f64().unwrap() <= 1.0 + 1e-9);
}

#[test]
fn heavy_atom_is_violated() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.json");
    std::fs::write(&p, r#"{"dimension":2,"atoms":[{"x":[0,0],"mass":5}],"pieces":[]}"#).unwrap();
    let o = run(&["straight-check", "--input", p.to_str().unwrap(), "--s", "1", "--rmin", "1"]);
    assert_eq!(code(&o), 2);
    assert_eq!(json(&o)["status"], "violated");
}

#[test]
fn parallel_segments_split_in_two() {
    let dir = tempfile::tempdir().unwrap();
    let par = fixture(dir.path(), "par.json", r#"{"kind":"parallel_segments","length":10,"gap":0.5}"#);
    for mode in ["exact", "heuristic"] {
        let o = run(&["decompose", "--input", &par, "--s", "1", "--mode", mode]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let v = json(&o);
        let parts = v["parts"].as_array().unwrap();
        assert_eq!(parts.len(), 2, "{mode}");
        for p in parts {
            assert!((p["mass"].as_f64().unwrap() - 10.0).abs() < 1e-9);
            assert_eq!(p["certificate"]["status"], "certified");
        }
    }
}

#[test]
fn localize_reports_each_stage() {
    let dir = tempfile::tempdir().unwrap();
    let par = fixture(dir.path(), "par.json", r#"{"kind":"parallel_segments","length":10,"gap":0.5}"#);
    let o = run(&[
        "localize", "--input", &par, "--s", "1", "--rmin", "0.01", "--mode", "heuristic", "--epsilons", "15,5,1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stages = json(&o)["stages"].as_array().unwrap().clone();
    let kept: Vec<u64> = stages.iter().map(|s| s["kept"].as_u64().unwrap()).collect();
    assert_eq!(kept, vec![1, 2, 2]);
}

#[test]
fn fixture_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"kind":"atom_cloud","n":9,"mass_min":0.1,"mass_max":0.2,"seed":3}"#;
    let a = fixture(dir.path(), "a.json", spec);
    let text = std::fs::read_to_string(&a).unwrap();
    let mu: hausstraight::Measure64 = hausstraight::measure::load_measure_str(&text).unwrap();
    assert_eq!(mu.atoms().len(), 9);
    let again = hausstraight::measure::measure_to_string(&mu);
    let back: hausstraight::Measure64 = hausstraight::measure::load_measure_str(&again).unwrap();
    assert_eq!(mu, back);
}

#[test]
fn standard_fixture_set() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["fixtures", "--standard", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for name in ["segment", "parallel", "circle", "cantor_segments", "cantor_atoms", "atom_cloud", "atom_clusters"] {
        assert!(dir.path().join(format!("{name}.json")).exists(), "{name}");
    }
}

#[test]
fn content_profile_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let seg = fixture(dir.path(), "seg.json", r#"{"kind":"segment","length":4}"#);
    let csv = dir.path().join("p.csv");
    let o = run(&[
        "content", "--input", &seg, "--s", "1", "--deltas", "2,1,0.5", "--profile", csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(csv).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|t| t.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!(r[1] <= r[2]);
        assert!(r[2] >= 4.0 - 1e-9);
    }
}

#[test]
fn pde_solve_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let nu = dir.path().join("nu.json");
    std::fs::write(&nu, r#"{"dimension":2,"atoms":[{"x":[0.5,0.5],"mass":3}],"pieces":[]}"#).unwrap();
    let report = dir.path().join("r.json");
    let csv = dir.path().join("u.csv");
    let o = run(&[
        "pde-solve",
        "--input",
        nu.to_str().unwrap(),
        "--n",
        "32",
        "--test",
        "quadrants",
        "--report",
        report.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["residuals"].as_array().unwrap().len(), 4);
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 1 + 33 * 33);
}

#[test]
fn pde_refuses_heavy_atom() {
    let dir = tempfile::tempdir().unwrap();
    let nu = dir.path().join("nu.json");
    std::fs::write(&nu, r#"{"dimension":2,"atoms":[{"x":[0.5,0.5],"mass":13}],"pieces":[]}"#).unwrap();
    let o = run(&["pde-solve", "--input", nu.to_str().unwrap(), "--n", "16"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("refused"));
}

#[test]
fn verify_density_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "verify", "--suite", "density-oracle", "--seed", "7", "--plot-dir", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("[PASS]"), "{out}");
    assert!(out.contains("1 passed, 0 failed"));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let seg = fixture(dir.path(), "seg.json", r#"{"kind":"segment","length":3}"#);
    let cfg = dir.path().join("c.json");
    let body = serde_json::json!({"input": seg, "s": 1.0, "rmin": 0.01});
    std::fs::write(&cfg, body.to_string()).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "straight-check"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    std::fs::write(&cfg, r#"{"s": 1.0, "rmn": 0.01}"#).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "straight-check"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("rmn"));
}

#[test]
fn usage_errors() {
    assert_eq!(code(&run(&["--bogus"])), 64);
    assert_eq!(code(&run(&["straight-check", "--s", "one"])), 64);
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    let o = run(&["straight-check", "--s", "1"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--input"));
}
