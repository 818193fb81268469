use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn ksphere(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ksphere")).args(args).env_remove("KSPHERE_OUT").output().unwrap()
}

fn out_arg(dir: &TempDir, sub: &str) -> String {
    dir.path().join(sub).to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_canonical_model_succeeds() {
    let dir = TempDir::new().unwrap();
    let out = out_arg(&dir, "v");
    let o = ksphere(&["verify", "--alpha", "1/3,2/3,1", "--d", "0,-1/2,1", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cert = read_json(&Path::new(&out).join("certificate.json"));
    assert_eq!(cert["invariant"], true);
    assert_eq!(cert["remainder"], "0");
    let manifest = read_json(&Path::new(&out).join("manifest.json"));
    assert_eq!(manifest["mode"], "verify");
    assert_eq!(manifest["config"]["model"]["alpha"][0], "1/3");
}

#[test]
fn verify_rejects_a_non_invariant_field() {
    let dir = TempDir::new().unwrap();
    let out = out_arg(&dir, "v");
    let o = ksphere(&["verify", "--field", "x1 - x1^3", "x2", "x3", "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("violation"), "{}", stderr(&o));
    assert_eq!(read_json(&Path::new(&out).join("certificate.json"))["invariant"], false);
}

#[test]
fn verify_accepts_general_coefficients_from_a_file() {
    let dir = TempDir::new().unwrap();
    // x_i' = x_i (1 - |x|^2); quadratic slots are x1^2, x1x2, x1x3, x2^2, x2x3, x3^2.
    let run = |shift: &str, sub: &str| {
        let sphere = serde_json::json!(["-1", "0", "0", "-1", "0", shift]);
        let doc = serde_json::json!({
            "mode": "verify",
            "model": { "general": { "r": [1, 1, 1], "a_ij": sphere, "b_ij": sphere, "c_ij": sphere } }
        });
        let cfg = dir.path().join(format!("{sub}.json"));
        std::fs::write(&cfg, doc.to_string()).unwrap();
        ksphere(&["verify", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&dir, sub)])
    };
    let good = run("-1", "good");
    assert_eq!(good.status.code(), Some(0), "{}", stderr(&good));
    let bad = run("-1/2", "bad");
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("violation"));
}

#[test]
fn missing_seed_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let o = ksphere(&["ensemble", "--alpha", "1,2,3", "--sigma", "2", "--out", &out_arg(&dir, "e")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`seed`"), "{}", stderr(&o));
}

#[test]
fn zero_dt_names_the_key() {
    let dir = TempDir::new().unwrap();
    let o = ksphere(&["simulate-ode", "--alpha", "1,1,1", "--dt", "0", "--out", &out_arg(&dir, "o")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`dt`"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_names_the_key() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"model": {"alpha": [1, 1, 1]}, "bogus": 1}"#).unwrap();
    let o = ksphere(&["equilibria", "--config", cfg.to_str().unwrap(), "--out", &out_arg(&dir, "q")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));
}

#[test]
fn bad_flags_are_validation_errors() {
    assert_eq!(ksphere(&["simulate-ode", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(ksphere(&["--help"]).status.code(), Some(0));
}

#[test]
fn overflow_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let out = out_arg(&dir, "o");
    let ode =
        ksphere(&["simulate-ode", "--alpha", "1,1,1", "--x0", "100,100,100", "--dt", "0.1", "--T", "1", "--out", &out]);
    assert_eq!(ode.status.code(), Some(2), "{}", stderr(&ode));
    let sde = ksphere(&[
        "simulate-sde",
        "--alpha",
        "1,1,1",
        "--x0",
        "100,100,100",
        "--dt",
        "0.1",
        "--T",
        "1",
        "--sigma",
        "1",
        "--seed",
        "1",
        "--out",
        &out,
    ]);
    assert_eq!(sde.status.code(), Some(2), "{}", stderr(&sde));
}

#[test]
fn simulate_ode_writes_monitored_trajectory() {
    let dir = TempDir::new().unwrap();
    let out = out_arg(&dir, "o");
    let o = ksphere(&[
        "simulate-ode",
        "--alpha",
        "1,1,1",
        "--x0",
        "0.1,0.1,0.1",
        "--T",
        "50",
        "--record-every",
        "100",
        "--out",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(Path::new(&out).join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x1,x2,x3,L,H,norm"));
    assert_eq!(lines.count(), 501);
    let summary = read_json(&Path::new(&out).join("summary.json"));
    assert!(summary["L_end"].as_f64().unwrap().abs() < 1e-8);
}

#[test]
fn simulate_sde_writes_path_with_brownian_column() {
    let dir = TempDir::new().unwrap();
    let out = out_arg(&dir, "s");
    let o = ksphere(&[
        "simulate-sde",
        "--alpha",
        "1,2,3",
        "--sigma",
        "1",
        "--seed",
        "4",
        "--T",
        "1",
        "--dt",
        "0.01",
        "--out",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(Path::new(&out).join("path.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2,x3,W\n"));
    assert_eq!(csv.lines().count(), 102);
}

#[test]
fn ensemble_is_reproducible_from_its_manifest() {
    let dir = TempDir::new().unwrap();
    let first = out_arg(&dir, "a");
    let args =
        ["ensemble", "--alpha", "1,2,3", "--sigma", "1.5", "--seed", "11", "--paths", "16", "--T", "2", "--dt", "0.01"];
    let o = ksphere(&[&args[..], &["--out", &first]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest = read_json(&Path::new(&first).join("manifest.json"));
    assert_eq!(manifest["master_seed"], 11);

    let replay = dir.path().join("replay.json");
    std::fs::write(&replay, manifest["config"].to_string()).unwrap();
    let second = out_arg(&dir, "b");
    let o = ksphere(&["ensemble", "--config", replay.to_str().unwrap(), "--out", &second]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for file in ["summary.json", "histograms.csv"] {
        let a = std::fs::read(Path::new(&first).join(file)).unwrap();
        let b = std::fs::read(Path::new(&second).join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let csv = std::fs::read_to_string(Path::new(&first).join("histograms.csv")).unwrap();
    assert!(csv.starts_with("kind,coordinate,bin_lo,bin_hi,count,mass\n"));
}

#[test]
fn density_table_integrates_to_one() {
    let dir = TempDir::new().unwrap();
    let out = out_arg(&dir, "d");
    let o =
        ksphere(&["density", "--alpha", "2,1,1", "--sigma", "1", "--x-max", "6", "--n-points", "2001", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(Path::new(&out).join("density.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,p"));
    let pts: Vec<(f64, f64)> = lines
        .map(|l| {
            let (x, p) = l.split_once(',').unwrap();
            (x.parse().unwrap(), p.parse().unwrap())
        })
        .collect();
    let mass: f64 = pts.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
    assert!((mass - 1.0).abs() < 1e-4, "mass {mass}");
}

#[test]
fn density_without_a_density_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let o = ksphere(&["density", "--alpha", "1,1,1", "--sigma", "2", "--out", &out_arg(&dir, "d")]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn sweep_flags_critical_points() {
    let dir = TempDir::new().unwrap();
    let out = out_arg(&dir, "w");
    let grid = format!("1,{},3", 2f64.sqrt());
    let o = ksphere(&[
        "sweep",
        "--alpha",
        "1,2,3",
        "--sigma-grid",
        &grid,
        "--seed",
        "1",
        "--paths",
        "8",
        "--T",
        "1",
        "--dt",
        "0.01",
        "--out",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(Path::new(&out).join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "sigma,regime,absorption_fraction,ray_mass_x1,ray_mass_x2,ray_mass_x3");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].contains("critical"), "{}", lines[2]);
}

#[test]
fn figure1_writes_one_file_per_start() {
    let dir = TempDir::new().unwrap();
    let out = out_arg(&dir, "f");
    let o = ksphere(&["figure1", "--alpha", "1,1,1", "--n-starts", "3", "--T", "20", "--dt", "0.01", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let files = std::fs::read_dir(Path::new(&out).join("figure1")).unwrap().count();
    assert_eq!(files, 3 + 3 + 3);
    let bundle = read_json(&Path::new(&out).join("figure1.json"));
    assert_eq!(bundle["runs"].as_array().unwrap().len(), 9);
}

#[test]
fn figure1_refuses_uncovered_parameters() {
    let dir = TempDir::new().unwrap();
    let o = ksphere(&["figure1", "--alpha", "-1,1,1", "--out", &out_arg(&dir, "f")]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("outside both deterministic regimes"), "{}", stderr(&o));
    let o = ksphere(&["figure1", "--alpha", "1,1,1", "--d", "-1,0,0", "--out", &out_arg(&dir, "g")]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("non-isolated"), "{}", stderr(&o));
}

#[test]
fn default_output_root_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ksphere"))
        .args(["equilibria", "--alpha", "1,2,3"])
        .env("KSPHERE_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("equilibria").join("equilibria.json").exists());
    assert!(dir.path().join("equilibria").join("manifest.json").exists());
}
