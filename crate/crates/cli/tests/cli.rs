use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_twosided"));
    c.env_remove("TWOSIDED_OUT_DIR");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/panel_10k.csv")
}

const SCENARIO: &str = r#"{
  "seed": 5,
  "n_importers": 60,
  "n_exporters": 200,
  "density": 0.05,
  "first_year": 2015,
  "n_years": 2,
  "params": { "rho": 7.0, "eta": 2.5, "theta": 0.75, "phi": 0.35, "gamma": 1.0, "nu": 2.5 }
}
"#;

#[test]
fn hhi_output_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let raw = fixture();
    ok(d, &["ingest", "--input", raw.to_str().unwrap(), "--out", "panel.csv"]);
    ok(d, &["hhi", "--panel", "panel.csv", "--out", "a/concentration.csv"]);
    ok(d, &["hhi", "--panel", "panel.csv", "--out", "b/concentration.csv"]);
    for name in ["concentration.csv", "aggregate_concentration.csv", "concentration_summary.json"] {
        assert_eq!(fs::read(d.join("a").join(name)).unwrap(), fs::read(d.join("b").join(name)).unwrap(), "{name}");
    }
}

#[test]
fn exit_codes_separate_usage_from_runtime_errors() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &["hhi", "--panel", "missing.csv"]).status.code(), Some(2));
    assert_eq!(run(d, &["hhi", "--bogus"]).status.code(), Some(2));
    fs::write(d.join("panel.csv"), "year,importer_id\n2015,1\n").unwrap();
    assert_eq!(run(d, &["markup", "--panel", "panel.csv", "--phi", "1.5"]).status.code(), Some(2));
    assert_eq!(run(d, &["hhi", "--panel", "panel.csv"]).status.code(), Some(1));
}

#[test]
fn simulate_then_estimate_recovers_phi() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("scenario.json"), SCENARIO).unwrap();
    ok(d, &["simulate", "--config", "scenario.json", "--out", "synthetic.csv"]);
    ok(d, &["ingest", "--input", "synthetic.csv", "--out", "panel.csv"]);
    ok(d, &["estimate", "--panel", "panel.csv", "--out", "estimates.csv"]);
    let text = fs::read_to_string(d.join("estimates.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "phi_hat").unwrap();
    let pooled = rdr.records().next().unwrap().unwrap();
    let phi: f64 = pooled[col].parse().unwrap();
    assert!((phi - 0.35).abs() < 1e-4, "{phi}");
    assert!(d.join("equilibrium.json").is_file());
    assert!(d.join("phi_histogram.json").is_file());
}

#[test]
fn single_scenario_writes_only_that_series() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["ingest", "--input", fixture().to_str().unwrap(), "--out", "panel.csv"]);
    ok(d, &["counterfactual", "--panel", "panel.csv", "--scenario", "no-buyer-power", "--out", "nbp.csv"]);
    let text = fs::read_to_string(d.join("nbp.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.contains("no_buyer_power")));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn manifest_hashes_every_output() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["ingest", "--input", fixture().to_str().unwrap(), "--out", "panel.csv"]);
    ok(d, &["--out-dir", "run", "markup", "--panel", "panel.csv"]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("run/manifest_markup.json")).unwrap()).unwrap();
    let outputs = manifest["outputs"].as_array().unwrap();
    let names: Vec<&str> = outputs.iter().map(|o| o["path"].as_str().unwrap()).collect();
    for want in ["markups.csv", "markup_series.csv", "diagnostics.json", "price_distortion.csv"] {
        assert!(names.iter().any(|n| n.ends_with(want)), "{want} missing from {names:?}");
    }
    for o in outputs {
        assert!(Path::new(o["path"].as_str().unwrap()).is_absolute() || d.join(o["path"].as_str().unwrap()).is_file());
        assert_eq!(o["sha256"].as_str().unwrap().len(), 64);
    }
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 1);
}

#[test]
fn full_pipeline_is_deterministic() {
    let pipeline = |threads: &str| {
        let dir = TempDir::new().unwrap();
        let d = dir.path();
        let raw = fixture();
        let t = ["--threads", threads];
        ok(d, &[&t[..], &["ingest", "--input", raw.to_str().unwrap()]].concat());
        ok(d, &[&t[..], &["shares", "--panel", "panel.csv"]].concat());
        ok(d, &[&t[..], &["hhi", "--panel", "panel.csv"]].concat());
        ok(d, &[&t[..], &["estimate", "--panel", "panel.csv"]].concat());
        ok(d, &[&t[..], &["markup", "--panel", "panel.csv", "--phi-from", "estimates.csv"]].concat());
        ok(d, &[&t[..], &["counterfactual", "--panel", "panel.csv"]].concat());
        ok(d, &[&t[..], &["report", "--panel", "panel.csv", "--histogram", "phi_histogram.json"]].concat());
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| !p.to_string_lossy().ends_with(".json") || !p.file_name().unwrap().to_string_lossy().starts_with("manifest"))
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
            .collect();
        files.sort();
        files
    };
    let a = pipeline("1");
    let b = pipeline("4");
    assert_eq!(a.len(), b.len());
    for ((na, da), (nb, db)) in a.iter().zip(&b) {
        assert_eq!(na, nb);
        assert!(da == db, "{na} differs");
    }
    assert!(a.iter().any(|(n, _)| n == "report.svg"));
}
