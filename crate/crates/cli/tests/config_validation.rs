use std::process::Command;

use hawkes_scaling_cli::config::{validate_config, Kind};

const EXP: &str = r#"{"form": "exponential", "params": {"alpha": 1, "beta": 2}}"#;

#[test]
fn shipped_configs_validate() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") && !path.ends_with("schema.json") {
            let text = std::fs::read_to_string(&path).unwrap();
            if let Err(e) = validate_config(&text) {
                panic!("{}: {e}", path.display());
            }
            seen += 1;
        }
    }
    assert!(seen >= 6);
}

#[test]
fn minimal_config_applies_defaults() {
    let c = validate_config(&format!(r#"{{"kind": "resolvent", "seed": 1, "kernel": {EXP}}}"#)).unwrap();
    assert_eq!(c.kind, Kind::Resolvent);
    assert_eq!((c.grid.h, c.grid.horizon, c.paths), (1e-3, 1.0, 10_000));
}

#[test]
fn meanfield_tagged_bound_names_both_keys() {
    let e = validate_config(&format!(
        r#"{{"kind": "meanfield", "seed": 1, "kernel": {EXP}, "meanfield": {{"n": [10, 3], "K": 4, "mu0": 1}}}}"#
    ))
    .unwrap_err();
    let msg = e.to_string();
    assert!(msg.contains("meanfield.K") && msg.contains("meanfield.n"), "{msg}");
}

#[test]
fn seed_must_be_unsigned() {
    let e = validate_config(&format!(r#"{{"kind": "hawkes", "seed": -4, "kernel": {EXP}}}"#)).unwrap_err();
    assert!(e.0.iter().any(|i| i.key == "seed"), "{e}");
}

#[test]
fn regime_zeta_rules() {
    let base = r#""limit": {"triplet": {"m": 1, "lambda": 1}}"#;
    let e = validate_config(&format!(r#"{{"kind": "regime-compare", "seed": 1, {base}, "regime": {{"kind": "finite"}}}}"#)).unwrap_err();
    assert!(e.0.iter().any(|i| i.key == "regime.zeta"), "{e}");
    let e = validate_config(&format!(r#"{{"kind": "regime-compare", "seed": 1, {base}, "regime": {{"kind": "zero", "zeta": 2}}}}"#)).unwrap_err();
    assert!(e.0.iter().any(|i| i.key == "regime.zeta"), "{e}");
}

#[test]
fn binary_rejects_bad_config_with_key_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, format!(r#"{{"kind": "resolvent", "seed": 1, "grid": {{"h": -1}}, "kernel": {EXP}}}"#)).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hscale"))
        .args(["resolvent", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.h"));
}

#[test]
fn binary_rejects_kind_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, format!(r#"{{"kind": "resolvent", "seed": 1, "kernel": {EXP}}}"#)).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hscale")).args(["simulate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
