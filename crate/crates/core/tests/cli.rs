use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use supfbm::cli::{manifest_path, RunManifest, TABLE_CSV_HEADER};

fn supfbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_supfbm"))
        .args(args)
        .env_remove("SUPFBM_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn assert_valid(schema_file: &str, instance: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(schema_file);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{schema_file}: {errors:?}\n{instance:#}");
}

#[test]
fn exact_brownian_value_and_tag() {
    let out = supfbm(&["exact", "--hurst", "0.5", "--t", "1", "--gamma", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_valid("exact_value.schema.json", &v);
    assert_eq!(v["provenance"], "PROP1_I");
    assert!((v["value"].as_f64().unwrap() - 1.2533141373).abs() < 1e-10);
}

#[test]
fn exact_degenerate_value_and_tag() {
    let out = supfbm(&["exact", "--hurst", "1", "--t", "1", "--gamma", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_valid("exact_value.schema.json", &v);
    assert_eq!(v["provenance"], "PROP1_II");
    assert_eq!(v["value"].as_f64(), Some(1.0));
}

#[test]
fn exact_rejects_unknown_hurst() {
    let out = supfbm(&["exact", "--hurst", "0.7", "--t", "1", "--gamma", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("only for H = 0.5 and H = 1"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_and_domain_errors_exit_2() {
    assert_eq!(supfbm(&["exact", "--gamma", "1"]).status.code(), Some(2));
    assert_eq!(
        supfbm(&["bounds", "--hurst", "1.5", "--gamma", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        supfbm(&["bounds", "--hurst", "0.5", "--gamma", "-1"])
            .status
            .code(),
        Some(2)
    );
    let few = supfbm(&[
        "estimate", "--hurst", "0.5", "--gamma", "1", "--grid", "64", "--reps", "10",
    ]);
    assert_eq!(few.status.code(), Some(2));
    assert_eq!(
        supfbm(&["estimate", "--hurst", "0.5", "--gamma", "1", "--mode", "sideways"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn bounds_examples() {
    let v = stdout_json(&supfbm(&[
        "bounds", "--hurst", "0.5", "--t", "1", "--gamma", "1",
    ]));
    assert_valid("bounds_report.schema.json", &v);
    assert!((v["lower"].as_f64().unwrap() - 0.7979).abs() < 1e-4);
    assert!((v["upper"].as_f64().unwrap() - 1.5958).abs() < 1e-4);
    assert!((v["exact"].as_f64().unwrap() - 1.2533).abs() < 1e-4);

    let v = stdout_json(&supfbm(&[
        "bounds", "--hurst", "0.3", "--t", "1", "--gamma", "1",
    ]));
    assert_valid("bounds_report.schema.json", &v);
    assert!((v["lower"].as_f64().unwrap() - 0.7979).abs() < 1e-4);
    assert!(v["upper"].is_null() && v["exact"].is_null());
    assert_eq!(v["provenance"]["lower"], "THM1_I");

    let v = stdout_json(&supfbm(&[
        "bounds", "--hurst", "1", "--t", "2", "--gamma", "2",
    ]));
    assert_valid("bounds_report.schema.json", &v);
    assert_eq!(v["lower"].as_f64(), Some(4.0));
    assert_eq!(v["upper"].as_f64(), Some(8.0));
    assert_eq!(v["exact"].as_f64(), Some(4.0));
}

#[test]
fn floats_have_at_most_12_significant_digits() {
    let out = supfbm(&["exact", "--hurst", "0.5", "--t", "1", "--gamma", "1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"value\": 1.25331413732"), "{text}");
    let out = supfbm(&[
        "bounds", "--hurst", "0.5", "--gamma", "1", "--format", "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text,
        "lower,upper,exact\n0.797884560803,1.59576912161,1.25331413732\n"
    );
}

#[test]
fn table_shape_and_columns() {
    let out = supfbm(&[
        "table",
        "--hurst",
        "0.4,0.5,0.6",
        "--gamma",
        "1,2",
        "--t",
        "1",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], TABLE_CSV_HEADER);
    assert_eq!(lines.len(), 7);
    let cells = |l: &str| l.split(',').map(str::to_owned).collect::<Vec<_>>();
    for l in &lines[1..] {
        let c = cells(l);
        assert_eq!(c.len(), 8);
        match c[0].as_str() {
            "0.4" => assert!(c[4].is_empty() && c[5].is_empty()),
            "0.5" => assert!(!c[5].is_empty()),
            "0.6" => assert!(!c[4].is_empty() && c[5].is_empty()),
            other => panic!("unexpected row {other}"),
        }
    }
    // rows ordered by hurst, then gamma
    assert!(lines[1].starts_with("0.4,1,") && lines[2].starts_with("0.4,2,"));

    let v = stdout_json(&supfbm(&[
        "table",
        "--hurst",
        "0.4,0.5,0.6",
        "--gamma",
        "1,2",
    ]));
    assert_valid("table.schema.json", &v);
    assert_eq!(v.as_array().unwrap().len(), 6);
}

#[test]
fn table_with_estimates() {
    let v = stdout_json(&supfbm(&[
        "table",
        "--hurst",
        "0.5,1",
        "--gamma",
        "1",
        "--estimate",
        "--grid",
        "256",
        "--reps",
        "400",
    ]));
    assert_valid("table.schema.json", &v);
    for row in v.as_array().unwrap() {
        assert!(row["estimate"].as_f64().unwrap() > 0.0);
        assert!(row["stderr"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn estimate_writes_manifest_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("est.json");
    let out_s = out.to_str().unwrap();
    let args = [
        "estimate", "--hurst", "0.7", "--gamma", "1.5", "--grid", "512", "--reps", "300", "--seed",
        "5", "--out", out_s,
    ];
    let run = supfbm(&args);
    assert_eq!(
        run.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let result: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_valid("estimate_report.schema.json", &result);
    assert_eq!(result["seed"], 5);
    assert_eq!(result["mode"], "reflected");
    let mpath = manifest_path(&out);
    let manifest_json: Value = serde_json::from_slice(&std::fs::read(&mpath).unwrap()).unwrap();
    assert_valid("run_manifest.schema.json", &manifest_json);
    let manifest = RunManifest::read(&mpath).unwrap();
    assert_eq!(manifest.seed, 5);
    assert_eq!(manifest.parameters["grid"], 512);
    assert_eq!(manifest.parameters["hurst"], 0.7);
    assert_eq!(manifest.artifact_version, env!("CARGO_PKG_VERSION"));

    let replay = supfbm(&["replay", mpath.to_str().unwrap()]);
    assert_eq!(replay.status.code(), Some(0));
    let r = stdout_json(&replay);
    assert_eq!(r["matches"], true);
    assert_eq!(
        r["actual_digest"].as_str(),
        Some(manifest.results_digest.as_str())
    );

    // a tampered digest is reported as a verification failure
    let mut bad = manifest.clone();
    bad.results_digest = "0".repeat(64);
    let bad_path = dir.path().join("bad.manifest.json");
    std::fs::write(&bad_path, serde_json::to_vec(&bad).unwrap()).unwrap();
    assert_eq!(
        supfbm(&["replay", bad_path.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn estimate_one_sided_csv() {
    let out = supfbm(&[
        "estimate",
        "--hurst",
        "0.5",
        "--gamma",
        "1",
        "--grid",
        "256",
        "--reps",
        "200",
        "--mode",
        "one-sided",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("point,stderr,ci_low,ci_high"));
    assert!(lines[1].contains(",one_sided,"));
}

#[test]
fn estimate_richardson_fills_extrapolation() {
    let v = stdout_json(&supfbm(&[
        "estimate",
        "--hurst",
        "0.5",
        "--gamma",
        "1",
        "--grid",
        "1024",
        "--reps",
        "400",
        "--richardson",
    ]));
    assert_valid("estimate_report.schema.json", &v);
    assert!(v["bias_extrapolated"].as_f64().unwrap() > v["point"].as_f64().unwrap() - 0.2);
}

#[test]
fn threads_flag_and_env_do_not_change_output() {
    let args = [
        "estimate", "--hurst", "0.4", "--gamma", "2", "--grid", "256", "--reps", "333",
    ];
    let a = supfbm(&[&args[..], &["--threads", "1"]].concat());
    let b = supfbm(&[&args[..], &["--threads", "3"]].concat());
    let c = Command::new(env!("CARGO_BIN_EXE_supfbm"))
        .args(args)
        .env("SUPFBM_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn verify_analytic_suites() {
    for suite in ["closed_form", "identities"] {
        let out = supfbm(&["verify", "--suite", suite]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let v = stdout_json(&out);
        assert_valid("verify_report.schema.json", &v);
        assert_eq!(v["passed"], true);
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("0 failed"), "{err}");
    }
}

#[test]
fn verify_identities_names_both_identities() {
    let v = stdout_json(&supfbm(&["verify", "--suite", "identities"]));
    let names: Vec<&str> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(names.iter().any(|n| n.contains("Euler polynomials")));
    assert!(names.iter().any(|n| n.contains("integral")));
    assert_eq!(names.len(), 7 + 4 + 10);
}

#[test]
fn verify_quick_statistical_suites() {
    for suite in ["bounds_mc", "distribution"] {
        let out = supfbm(&["verify", "--suite", suite, "--quick", "--format", "csv"]);
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(0), "{err}");
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.starts_with("suite,name,passed"));
        assert!(!text.contains(",false,"), "{text}");
    }
}
