use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reskernel")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn gen_accepts_a_bare_generator_spec() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "g.json", r#"{"family": "sierpinski", "level": 2}"#);
    let out = tmp.path().join("net");
    let o = run(&["gen", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let net: Value = serde_json::from_str(&fs::read_to_string(out.join("network.json")).unwrap()).unwrap();
    assert_eq!(net["vertices"].as_array().unwrap().len(), 15);
}

#[test]
fn analyze_a_network_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "g.json", r#"{"family": "path", "n": 41}"#);
    let net_dir = tmp.path().join("net");
    assert!(run(&["gen", "--config", &cfg, "--out", net_dir.to_str().unwrap()]).status.success());
    let out = tmp.path().join("an");
    let o = run(&[
        "analyze",
        "--network",
        net_dir.join("network.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("profile.csv").exists());
    let model: Value = serde_json::from_str(&fs::read_to_string(out.join("model.json")).unwrap()).unwrap();
    assert!(model["model"]["alpha"].as_f64().unwrap() > 0.8);
}

#[test]
fn certify_path_ondiag() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &format!(r#"{{"generator": {{"family": "path", "n": 101}}, "mode": "ondiag", "out": {:?}}}"#, out),
    );
    let o = run(&["certify", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["schema_version"], 1);
    assert_eq!(s["verdicts"]["ondiag"]["status"], "holds");
    let slope = s["metrics"]["ondiag.slope"].as_f64().unwrap();
    assert!((slope + 0.5).abs() < 0.05, "{slope}");
    assert_eq!(s["config"]["generator"]["n"], 101);
    for f in ["network.json", "profile.csv", "model.json", "exponents.json", "cert_ondiag.json"] {
        assert!(out.join(f).exists(), "{f}");
    }

    // identical config: identical bytes
    let first: Vec<(String, Vec<u8>)> = read_all(&out);
    let o = run(&["certify", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_all(&out), first);

    // CSV tables from the written bundle
    let o = run(&["report", "--out", out.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("cert_ondiag.csv")).unwrap();
    assert!(table.starts_with("t,p_min,p_median,p_max"));
    assert!(fs::read_to_string(out.join("summary.csv")).unwrap().contains("verdict,ondiag,holds"));
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn config_wins_over_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let cfg = write_config(
        tmp.path(),
        "c.json",
        &format!(r#"{{"generator": {{"family": "path", "n": 61}}, "mode": "fluct", "out": {:?}}}"#, out),
    );
    let o = run(&["certify", "--config", &cfg, "--mode", "ondiag"]);
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("warning: --mode"), "{stderr}");
    // the uniform path fails the fluctuation hypotheses
    assert_eq!(o.status.code(), Some(3));
    let s = summary(&out);
    assert_eq!(s["config"]["mode"], "fluct");
    assert_eq!(s["status"]["kind"], "hypotheses_not_met");
}

#[test]
fn distinct_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("narrow");
    let cfg = write_config(tmp.path(), "n.json", r#"{"generator": {"family": "path", "n": 4}}"#);
    let o = run(&["certify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(summary(&out)["status"]["kind"], "window_too_small");

    let out = tmp.path().join("infeasible");
    let cfg = write_config(
        tmp.path(),
        "i.json",
        r#"{"generator": {"family": "two_weighted_tree", "depth": 3, "weights": [8.0, 1.0]}, "family": "polynomial", "mode": "offdiag"}"#,
    );
    let o = run(&["certify", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let reason = summary(&out)["status"]["reason"].as_str().unwrap().to_string();
    assert!(reason.contains("beta_l/(8(2+beta_u)^2)"), "{reason}");

    let o = run(&["certify", "--config", tmp.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seed_flag_reaches_random_generators() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "g.json",
        r#"{"family": "dendrite", "shape": "galton_watson", "size": 60, "law": "poisson", "seed": 1}"#,
    );
    let read = |seed: &str, name: &str| {
        let out = tmp.path().join(name);
        assert!(run(&["gen", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]).status.success());
        fs::read_to_string(out.join("network.json")).unwrap()
    };
    assert_eq!(read("5", "a"), read("5", "b"));
    assert_ne!(read("5", "a"), read("6", "c"));
}
