use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qsdlab"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("QSDLAB_THREADS").output().expect("spawn qsdlab")
}

fn write_spec(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("spec.json");
    fs::write(&p, body).unwrap();
    p
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn csv_bodies(dir: &Path) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    v.sort();
    v
}

const CHAIN: &str = r#""model": { "kind": "bd", "lambda": [1.0, 1.0], "mu": [1.0, 1.0], "c": [[1.0, 0.2], [0.2, 1.0]] }"#;

#[test]
fn bundled_chain_spec_passes_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let spec = bundled("lv2d_bd.json");
    for dir in [&a, &b] {
        let o = run(&["run", "--spec", spec.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let m = manifest(&a);
    let names: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(names.len(), 9, "{names:?}");
    for n in &names {
        assert!(a.join(n).exists(), "{n}");
    }
    assert_eq!(m["seed"], 2024);
    assert_eq!(m["schema"], 1);
    assert_eq!(m["spec_sha256"].as_str().unwrap().len(), 64);
    assert!(m["wall_times"]["total"].as_f64().unwrap() > 0.0);
    let (ca, cb) = (csv_bodies(&a), csv_bodies(&b));
    assert_eq!(ca.len(), 6);
    assert_eq!(ca, cb);
    let certs: Value = serde_json::from_str(&fs::read_to_string(a.join("certificates.json")).unwrap()).unwrap();
    assert!(certs.as_array().unwrap().iter().all(|c| c["verdict"] == "holds"));
}

#[test]
fn seed_override_changes_the_estimates() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(
        tmp.path(),
        &format!(
            r#"{{ "schema": 1, "seed": 1, {CHAIN},
                 "estimation": {{ "methods": ["fleming_viot"], "fleming_viot": {{ "particles": 200, "horizon": 4.0, "dt_sync": 0.01, "record_every": 0.1 }} }} }}"#
        ),
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, seed) in [(&a, "1"), (&b, "2")] {
        let o = run(&["estimate", "--spec", spec.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--seed", seed]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(manifest(&b)["seed"], 2);
    assert_ne!(fs::read_to_string(a.join("fv_qsd.csv")).unwrap(), fs::read_to_string(b.join("fv_qsd.csv")).unwrap());
}

#[test]
fn mismatched_dimension_is_invalid_with_a_line() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(
        tmp.path(),
        "{\n  \"schema\": 1,\n  \"seed\": 1,\n  \"output\": \"x\",\n  \"model\": { \"kind\": \"bd\", \"lambda\": [1, 1], \"mu\": [1, 1, 1], \"c\": [[1, 0], [0, 1]] }\n}\n",
    );
    let o = run(&["run", "--spec", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("spec.json:5:") && err.contains("dimension"), "{err}");
}

#[test]
fn malformed_json_and_unknown_fields_are_invalid() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), "{\n  \"schema\": 1,\n  \"seed\": 1,,\n}\n");
    let o = run(&["run", "--spec", spec.to_str().unwrap(), "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("spec.json:3:"));
    let spec = write_spec(tmp.path(), &format!(r#"{{ "schema": 1, "seed": 1, "colour": 3, {CHAIN} }}"#));
    assert_eq!(run(&["check", "--spec", spec.to_str().unwrap(), "--out", "x"]).status.code(), Some(2));
    let spec = write_spec(tmp.path(), &format!(r#"{{ "schema": 2, "seed": 1, {CHAIN} }}"#));
    assert_eq!(run(&["check", "--spec", spec.to_str().unwrap(), "--out", "x"]).status.code(), Some(2));
}

#[test]
fn huge_eta_is_a_violation_with_counterexamples() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let spec = write_spec(
        tmp.path(),
        &format!(r#"{{ "schema": 1, "seed": 1, {CHAIN}, "lyapunov": {{ "eta": 1e6 }}, "checks": ["assumption", "condition_a"] }}"#),
    );
    let o = run(&["check", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("counterexamples.json"));
    let cx: Value = serde_json::from_str(&fs::read_to_string(out.join("counterexamples.json")).unwrap()).unwrap();
    let first = &cx.as_array().unwrap()[0];
    assert_eq!(first["verdict"], "violated");
    assert!(!first["counterexamples"].as_array().unwrap().is_empty());
    assert_eq!(manifest(&out)["exit_code"], 1);
}

#[test]
fn estimate_with_zero_budget_is_invalid() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(
        tmp.path(),
        &format!(
            r#"{{ "schema": 1, "seed": 1, {CHAIN},
                 "estimation": {{ "methods": ["conditioned_mc"],
                   "conditioned_mc": {{ "trajectories": 0, "horizon": 1.0, "steps": 10, "initial": [[1, 1], [2, 2]], "bins": 6 }} }} }}"#
        ),
    );
    let o = run(&["estimate", "--spec", spec.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("trajectories"));
}

#[test]
fn estimate_without_an_estimation_block_is_invalid() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), &format!(r#"{{ "schema": 1, "seed": 1, {CHAIN} }}"#));
    assert_eq!(run(&["estimate", "--spec", spec.to_str().unwrap(), "--out", "x"]).status.code(), Some(2));
}

#[test]
fn oracle_on_a_single_state_box() {
    // From (1, 1) every birth leaves the box and every death absorbs, so the
    // QSD is the Dirac mass and q = sum_j (lambda_j + mu_j + sum_i c_ji).
    let q = 2.0 * (1.0 + 1.0 + 1.2);
    let spec = bundled("lv2d_bd.json");
    let o = run(&["oracle", "--spec", spec.to_str().unwrap(), "--box", "1,1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["lambda0"].as_f64().unwrap() - q).abs() < 1e-12);
    let atoms = v["qsd"].as_array().unwrap();
    assert_eq!(atoms.len(), 1);
    assert_eq!(atoms[0]["state"], serde_json::json!([1, 1]));
    assert_eq!(atoms[0]["mass"], 1.0);
    let o = run(&["oracle", "--spec", spec.to_str().unwrap(), "--box", "1,1"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("lambda0 = 6.4") && text.contains("1,1,1.0"), "{text}");
}

#[test]
fn oracle_rejects_a_diffusion_and_a_wrong_box() {
    let spec = bundled("lv2d_feller.json");
    assert_eq!(run(&["oracle", "--spec", spec.to_str().unwrap()]).status.code(), Some(2));
    let spec = bundled("lv2d_bd.json");
    assert_eq!(run(&["oracle", "--spec", spec.to_str().unwrap(), "--box", "3"]).status.code(), Some(2));
}

#[test]
fn feller_checks_hold_with_one_thread() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = bundled("lv2d_feller.json");
    let o = bin()
        .args(["check", "--spec", spec.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "--format", "json"])
        .env("QSDLAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    for k in ["feller_assumption", "condition_a", "condition_b", "comparison"] {
        assert!(v["results"][k].as_str().unwrap().starts_with("holds"), "{k}: {}", v["results"][k]);
    }
    let names = manifest(tmp.path())["artifacts"].clone();
    assert_eq!(names, serde_json::json!(["lyapunov_params.json", "certificates.json"]));
}

#[test]
fn zero_threads_is_invalid() {
    let spec = bundled("lv2d_bd.json");
    let o = bin().args(["check", "--spec", spec.to_str().unwrap(), "--out", "x"]).env("QSDLAB_THREADS", "0").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn spec_without_output_needs_out() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), &format!(r#"{{ "schema": 1, "seed": 1, {CHAIN} }}"#));
    assert_eq!(run(&["check", "--spec", spec.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn checks_must_fit_the_model() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), &format!(r#"{{ "schema": 1, "seed": 1, {CHAIN}, "checks": ["comparison"] }}"#));
    assert_eq!(run(&["check", "--spec", spec.to_str().unwrap(), "--out", "x"]).status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(
        tmp.path(),
        &format!(
            r#"{{ "schema": 1, "seed": 3, {CHAIN},
                 "estimation": {{ "methods": ["fleming_viot", "conditioned_mc"],
                   "fleming_viot": {{ "particles": 300, "horizon": 4.0, "dt_sync": 0.01, "record_every": 0.1 }},
                   "conditioned_mc": {{ "trajectories": 5000, "horizon": 1.0, "steps": 20, "initial": [[1, 1], [5, 5]], "bins": 6 }} }} }}"#
        ),
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let o = run(&["estimate", "--spec", spec.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--threads", threads]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(csv_bodies(&a), csv_bodies(&b));
}
