use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqwarp")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> (i32, Value) {
    let o = run(args);
    (o.status.code().unwrap(), serde_json::from_str(&stdout(&o)).unwrap())
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn flat_model_passes() {
    let o = run(&["verify", path(&model("flat.toml"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("52 of 52 records passed"));
}

#[test]
fn fault_injection_fails_only_its_record() {
    let (code, v) = json(&["verify", path(&model("generic.toml")), "--samples", "5", "--inject-fault", "lemma.riemann.3", "--json"]);
    assert_eq!(code, 1);
    assert_eq!(v["summary"]["failed_ids"], serde_json::json!(["lemma.riemann.3"]));
}

#[test]
fn unknown_fault_and_bad_args_are_input_errors() {
    let o = run(&["verify", path(&model("flat.toml")), "--inject-fault", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["verify", path(&model("flat.toml")), "--samples", "x"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.toml");
    let src = std::fs::read_to_string(model("flat.toml")).unwrap().replace("h = \"1\"\n", "");
    std::fs::write(&p, src).unwrap();
    let o = run(&["verify", path(&p)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warpings.h"));
}

#[test]
fn repeated_runs_are_identical() {
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("wall_time_ms");
        v
    };
    let ssst = model("ssst.toml");
    let args = ["verify", path(&ssst), "--samples", "6", "--json"];
    assert_eq!(strip(json(&args).1), strip(json(&args).1));

    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(&["report", path(&model("generic.toml")), "--samples", "4", "--format", "json,csv", "--out", path(d.path())]);
        assert_eq!(o.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir, f: &str| std::fs::read_to_string(d.path().join(f)).unwrap();
    assert_eq!(
        strip(serde_json::from_str(&read(&a, "report.json")).unwrap()),
        strip(serde_json::from_str(&read(&b, "report.json")).unwrap())
    );
    assert_eq!(read(&a, "residuals.csv"), read(&b, "residuals.csv"));
}

#[test]
fn report_files_follow_their_contracts() {
    let dir = tempfile::tempdir().unwrap();
    let samples = 7;
    let o = run(&[
        "report",
        path(&model("sgrw-affine.toml")),
        "--samples",
        &samples.to_string(),
        "--format",
        "json,txt,csv",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));

    let schema: Value = serde_json::from_str(seqwarp_cli::report::REPORT_SCHEMA).unwrap();
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    assert_eq!(report["schema_version"], "1.0");

    let txt = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    for k in 1..=11 {
        let rows = txt.lines().filter(|l| l.split_whitespace().next() == Some(&format!("pp.case.{k}"))).count();
        assert_eq!(rows, 1, "pp.case.{k}");
    }

    let csv = std::fs::read_to_string(dir.path().join("residuals.csv")).unwrap();
    let rows = csv.lines().count() - 1;
    assert_eq!(rows, samples * seqwarp_cli::commands::CSV_FIELDS.len());
}

#[test]
fn classify_fixtures() {
    let (_, v) = json(&["classify", path(&model("minkowski.toml")), "--json"]);
    let c = &v["classification"];
    assert_eq!(c["flatness"]["flat"], true);
    assert_eq!(c["flatness"]["max_norm"], 0.0);
    for (_, r) in c["sgrw"]["max_residuals"].as_array().unwrap().iter().map(|p| (p[0].clone(), p[1].as_f64().unwrap())) {
        assert_eq!(r, 0.0);
    }

    let o = run(&["classify", path(&model("sphere-factor.toml"))]);
    let out = stdout(&o);
    assert!(out.contains("NOT FLAT") && out.contains("witness point"), "{out}");

    let o = run(&["classify", path(&model("sgrw-affine.toml"))]);
    let out = stdout(&o);
    assert!(out.contains("M2 must be flat"), "{out}");

    let (_, v) = json(&["classify", path(&model("flat.toml")), "--probe", path(&model("gaussian-probe.toml")), "--json"]);
    let p = &v["classification"]["probe"];
    assert!(p["gqe"].as_f64().unwrap() < 1e-12 && p["psi_soliton"].as_f64().unwrap() < 1e-12, "{p}");
}

#[test]
fn classify_rejects_zero_beta() {
    let o = run(&["classify", path(&model("flat.toml")), "--alpha", "1", "--beta", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let (_, v) = json(&["classify", path(&model("flat.toml")), "--alpha", "-2", "--beta", "3", "--json"]);
    assert_eq!(v["model"]["alpha"], -2.0);
}

#[test]
fn presets_are_listed() {
    let out = stdout(&run(&["presets", "list"]));
    for name in ["minkowski", "sgrw", "ssst"] {
        assert!(out.lines().any(|l| l.starts_with(name)), "{out}");
    }
}
