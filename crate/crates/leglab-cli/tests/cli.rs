use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_leglab"))
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("leglab-cli-test-{}-{}", std::process::id(), name));
    p
}

#[test]
fn demo_list_has_enough_names() {
    let out = bin().args(["demo", "--list"]).output().unwrap();
    assert!(out.status.success());
    let names: Vec<&str> = std::str::from_utf8(&out.stdout).unwrap().trim().lines().collect();
    assert!(names.len() >= 6, "only {} demos", names.len());
    assert!(names.contains(&"carleman-axis"));
}

#[test]
fn unknown_demo_and_empty_name_are_usage_errors() {
    let out = bin().args(["demo", "definitely-not-a-demo"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["demo", ""]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_pipeline_is_usage_error() {
    let spec = tmp("spec-unknown.json");
    std::fs::write(&spec, "{}").unwrap();
    let out = bin()
        .args(["run", "frobnicate", spec.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_exit_codes() {
    // a valid curve bundle
    let spec = tmp("disk-jets.json");
    let curve = tmp("curve.json");
    assert!(bin()
        .args(["demo", "disk-jets", "--out", spec.to_str().unwrap()])
        .output()
        .unwrap()
        .status
        .success());
    assert!(bin()
        .args(["run", "approximate", spec.to_str().unwrap(), "--out", curve.to_str().unwrap()])
        .output()
        .unwrap()
        .status
        .success());
    let out = bin().args(["verify", curve.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));

    // break the curve: zero out z on a nonconstant curve
    let text = std::fs::read_to_string(&curve).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["curve"]["z"]["poly"] = serde_json::json!([]);
    let broken = tmp("broken.json");
    std::fs::write(&broken, serde_json::to_string(&v).unwrap()).unwrap();
    let out = bin().args(["verify", broken.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["legendrian_residual"].as_f64().unwrap() > 1e-3);

    // malformed JSON
    let bad = tmp("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = bin().args(["verify", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runs_are_deterministic_and_round_trip() {
    let spec = tmp("det-spec.json");
    let c1 = tmp("det-curve-1.json");
    let c2 = tmp("det-curve-2.json");
    assert!(bin()
        .args(["demo", "disk-n2", "--out", spec.to_str().unwrap()])
        .output()
        .unwrap()
        .status
        .success());
    for c in [&c1, &c2] {
        assert!(bin()
            .args([
                "run",
                "approximate",
                spec.to_str().unwrap(),
                "--seed",
                "12345",
                "--out",
                c.to_str().unwrap(),
            ])
            .output()
            .unwrap()
            .status
            .success());
    }
    let b1 = std::fs::read(&c1).unwrap();
    let b2 = std::fs::read(&c2).unwrap();
    assert_eq!(b1, b2, "curve JSON must be byte-identical for equal seeds");

    // round trip: verify reads back the same certificates
    let out = bin().args(["verify", c1.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn leglab_threads_validation() {
    let out = bin()
        .env("LEGLAB_THREADS", "0")
        .args(["demo", "--list"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .env("LEGLAB_THREADS", "4")
        .args(["demo", "--list"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}
