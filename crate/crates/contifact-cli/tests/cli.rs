//! End-to-end runs of the command-line driver through real files.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn contifact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contifact"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> String {
    p.to_str().expect("utf-8 path").to_owned()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text
        .lines()
        .find(|l| l.starts_with('{'))
        .unwrap_or_else(|| panic!("no JSON line on stderr: {text}"));
    serde_json::from_str(line).expect("stderr JSON parses")
}

#[test]
fn factorize_verify_round_trip_on_a_rational_density() {
    let dir = tempfile::tempdir().unwrap();
    let density = path_str(&dir.path().join("s.json"));
    let oracle = path_str(&dir.path().join("a.json"));
    let factor = path_str(&dir.path().join("f.json"));
    let report = path_str(&dir.path().join("f.report.json"));

    let synth = contifact(&[
        "synth",
        "rational2",
        "--output",
        &density,
        "--oracle",
        &oracle,
        "--window-t",
        "128",
        "--samples",
        "8192",
    ]);
    assert!(synth.status.success(), "{}", String::from_utf8_lossy(&synth.stderr));

    let fac = contifact(&["factorize", &density, "--output", &factor, "--bins", "8"]);
    assert!(fac.status.success(), "{}", String::from_utf8_lossy(&fac.stderr));
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let residual = rep["residual_l1"].as_f64().unwrap();
    assert!(residual <= 1e-3, "residual_l1 {residual:.3e}");

    let ver = contifact(&["verify", &density, &factor]);
    assert!(ver.status.success(), "{}", String::from_utf8_lossy(&ver.stderr));

    // The exact factor verifies essentially to rounding.
    let ver_oracle = contifact(&["verify", &density, &oracle]);
    assert!(ver_oracle.status.success());
    let oracle_report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.report.json")).unwrap())
            .unwrap();
    assert!(oracle_report["residual_l1"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn gaussian_density_is_rejected_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let density = path_str(&dir.path().join("g.json"));
    let factor = path_str(&dir.path().join("f.json"));

    let synth = contifact(&[
        "synth",
        "gaussian",
        "--output",
        &density,
        "--window-t",
        "16",
        "--samples",
        "4096",
    ]);
    assert!(synth.status.success(), "{}", String::from_utf8_lossy(&synth.stderr));

    let fac = contifact(&["factorize", &density, "--output", &factor, "--bins", "4"]);
    assert_eq!(fac.status.code(), Some(2));
    let err = stderr_json(&fac);
    assert_eq!(err["error"], "paley_wiener_diverged");
}

#[test]
fn truncated_binary_payload_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let density = dir.path().join("s.bin");
    let factor = path_str(&dir.path().join("f.json"));

    let synth = contifact(&[
        "synth",
        "scalar",
        "--output",
        &path_str(&density),
        "--window-t",
        "64",
        "--samples",
        "2048",
    ]);
    assert!(synth.status.success());

    let bytes = fs::read(&density).unwrap();
    fs::write(&density, &bytes[..bytes.len() - 128]).unwrap();

    let fac = contifact(&["factorize", &path_str(&density), "--output", &factor]);
    assert_eq!(fac.status.code(), Some(1));
    let err = stderr_json(&fac);
    assert_eq!(err["error"], "validation");
    assert!(err["detail"].as_str().unwrap().contains("truncated"));
}

#[test]
fn verify_with_mismatched_orders_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let scalar_density = path_str(&dir.path().join("s1.json"));
    let scalar_oracle = path_str(&dir.path().join("a1.json"));
    let pair_density = path_str(&dir.path().join("s2.json"));

    for (name, out, oracle) in [
        ("scalar", &scalar_density, Some(&scalar_oracle)),
        ("rational2", &pair_density, None),
    ] {
        let mut args = vec![
            "synth",
            name,
            "--output",
            out,
            "--window-t",
            "64",
            "--samples",
            "2048",
        ];
        if let Some(o) = oracle {
            args.extend_from_slice(&["--oracle", o]);
        }
        let synth = contifact(&args);
        assert!(synth.status.success());
    }

    let ver = contifact(&["verify", &pair_density, &scalar_oracle]);
    assert_eq!(ver.status.code(), Some(1));
    let err = stderr_json(&ver);
    assert_eq!(err["error"], "grid_mismatch");
}

#[test]
fn convergence_writes_one_row_per_bin_count() {
    let dir = tempfile::tempdir().unwrap();
    let density = path_str(&dir.path().join("s.json"));
    let table = dir.path().join("sweep.csv");

    let synth = contifact(&[
        "synth",
        "twisted2",
        "--output",
        &density,
        "--window-t",
        "128",
        "--samples",
        "8192",
    ]);
    assert!(synth.status.success(), "{}", String::from_utf8_lossy(&synth.stderr));

    let conv = contifact(&[
        "convergence",
        &density,
        "--output",
        &path_str(&table),
        "--bins",
        "2",
        "--bins",
        "4",
    ]);
    assert!(conv.status.success(), "{}", String::from_utf8_lossy(&conv.stderr));
    let text = fs::read_to_string(&table).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "bins,residual_l1,row_analyticity,det_identity,wall_time_s");
    for row in &lines[1..] {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 5);
        assert!(fields[1].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn transform_exports_spectra_and_rejects_unknown_ops() {
    let dir = tempfile::tempdir().unwrap();
    let density = path_str(&dir.path().join("s.json"));
    let csv = dir.path().join("plus.csv");

    let synth = contifact(&[
        "synth",
        "scalar",
        "--output",
        &density,
        "--window-t",
        "64",
        "--samples",
        "2048",
    ]);
    assert!(synth.status.success());

    let tr = contifact(&[
        "transform",
        &density,
        "--op",
        "plus",
        "--output",
        &path_str(&csv),
    ]);
    assert!(tr.status.success(), "{}", String::from_utf8_lossy(&tr.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 2049);
    assert!(text.starts_with("t,re,im"));

    let bad = contifact(&[
        "transform",
        &density,
        "--op",
        "sideways",
        "--output",
        &path_str(&csv),
    ]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn reports_are_deterministic_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let density = path_str(&dir.path().join("s.json"));

    let synth = contifact(&[
        "synth",
        "rational2",
        "--output",
        &density,
        "--window-t",
        "64",
        "--samples",
        "4096",
    ]);
    assert!(synth.status.success());

    let mut reports = Vec::new();
    for run in 0..2 {
        let factor = path_str(&dir.path().join(format!("f{run}.json")));
        let report = dir.path().join(format!("f{run}.report.json"));
        let fac = contifact(&[
            "factorize",
            &density,
            "--output",
            &factor,
            "--bins",
            "4",
            "--seed",
            "9",
        ]);
        assert!(fac.status.success(), "{}", String::from_utf8_lossy(&fac.stderr));
        reports.push(fs::read_to_string(report).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}
