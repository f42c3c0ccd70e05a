//! Drives the `pnqkd` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn pnqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnqkd")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = pnqkd(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Header and rows of a CSV with `#` metadata lines.
fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| if x == "inf" { f64::INFINITY } else { x.parse().unwrap() }).collect())
        .collect();
    (header, rows)
}

fn column(text: &str, name: &str) -> Vec<f64> {
    let (header, rows) = parse_csv(text);
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i]).collect()
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

#[test]
fn bounds_match_golden_bytes() {
    assert_eq!(stdout(&["bounds", "--grid", "0:200:25"]), golden("bounds.csv"));
}

#[test]
fn sweep_matches_golden_values() {
    let got = stdout(&["sweep", "--grid", "0:200:25", "--workers", "3"]);
    let want = golden("sweep_table3.csv");
    let (gh, gr) = parse_csv(&got);
    let (wh, wr) = parse_csv(&want);
    assert_eq!(gh, wh);
    assert_eq!(got.lines().take(3).collect::<Vec<_>>(), want.lines().take(3).collect::<Vec<_>>());
    for (g, w) in gr.iter().flatten().zip(wr.iter().flatten()) {
        assert!(g == w || (g - w).abs() < 1e-10, "{g} vs {w}");
    }
}

#[test]
fn bound_formulas() {
    let tau_half = 10.0 * 2f64.log10() / 0.2;
    let out = stdout(&["bounds", "--grid", &format!("{tau_half}:{tau_half}:1")]);
    assert!((column(&out, "plob")[0] - 1.0).abs() < 1e-9);
    let out = stdout(&["bounds", "--grid", "100:100:1"]);
    assert!((column(&out, "plob")[0] - 0.0145).abs() < 1e-4);
    assert!(stdout(&["bounds", "--grid", "0:0:1"]).lines().last().unwrap().starts_with("0,1,inf,inf"));
}

#[test]
fn lossless_single_point() {
    let out = stdout(&["sweep", "--grid", "0:0:1", "--coeffs", "0.5,0.5"]);
    assert!((column(&out, "key_rate")[0] - 0.5).abs() < 1e-9);
}

#[test]
fn single_photon_sweep_crosses_plob_near_108_km() {
    let out = stdout(&["sweep", "--grid", "90:130:1", "--n-max", "1", "--coeffs", "table3"]);
    let d = column(&out, "distance_km");
    let k = column(&out, "key_rate");
    let plob = column(&out, "plob");
    let first = (0..d.len()).find(|&i| k[i] > plob[i]).expect("crossing");
    assert!((105.0..=111.0).contains(&d[first]), "crossing at {}", d[first]);
}

#[test]
fn realistic_detectors_keep_key_at_530_km() {
    let out = stdout(&["sweep", "--grid", "530:530:1", "--coeffs", "table5", "--detector", "eta=0.85,dark=5e-8"]);
    assert!(column(&out, "key_rate")[0] > 0.0);
    assert!(out.contains("P_d10"));
}

#[test]
fn optimize_reproduces_tables() {
    let out = stdout(&["optimize", "--grid", "200:200:1", "--n-max", "1"]);
    assert!((column(&out, "a0")[0] - 0.8575).abs() <= 0.01);
    let out = stdout(&["optimize", "--grid", "100:100:1", "--n-max", "7", "--gamma", "optimize"]);
    assert!((column(&out, "gamma")[0] - 0.26).abs() <= 0.02);
}

#[test]
fn runs_are_byte_identical_across_seeds_and_workers() {
    let args = ["optimize", "--grid", "0:60:20", "--n-max", "3", "--seed", "5"];
    let one = stdout(&[&args[..], &["--workers", "1"]].concat());
    let four = stdout(&[&args[..], &["--workers", "4"]].concat());
    assert_eq!(one, four);
    assert!(one.contains("# seed: 5"));
}

#[test]
fn check_states_table() {
    let text = stdout(&["check-states"]);
    assert!(text.contains("PASS"));
    assert_eq!(text.lines().filter(|l| l.contains("1/9") || l.contains("1/3") || l.ends_with(" 0")).count(), 24);
    let json: serde_json::Value = serde_json::from_str(&stdout(&["check-states", "--json"])).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 24);
    assert_eq!(json["pass"], true);
    let other: serde_json::Value = serde_json::from_str(&stdout(&["check-states", "--n-max", "1", "--json"])).unwrap();
    assert!(other["pass"].is_null());
}

#[test]
fn tomography_reports() {
    let json: serde_json::Value = serde_json::from_str(&stdout(&["tomography", "--distance", "100", "--json"])).unwrap();
    assert!(json["exact"]["trace_distance"].as_f64().unwrap() < 1e-10);
    let sampled: serde_json::Value =
        serde_json::from_str(&stdout(&["tomography", "--shots", "1000000", "--seed", "7", "--json"])).unwrap();
    assert!(sampled["sampled"]["trace_distance"].as_f64().unwrap() < 0.01);
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["tomography", "--shots", "0"],
        vec!["bounds", "--out", "/nonexistent-dir/x.csv"],
        vec!["sweep", "--grid", "0:10"],
        vec!["sweep", "--coeffs", "table2", "--n-max", "1"],
        vec!["sweep", "--unknown-flag"],
        vec!["tomography", "--n-max", "2"],
    ] {
        assert_eq!(pnqkd(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn config_file_and_outputs() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "grid = 0:20:10\nloss_db_km = 0.16\nseed = 3\n").unwrap();
    let csv = dir.path().join("rates.csv");
    let svg = dir.path().join("rates.svg");
    let overlay = dir.path().join("ref.csv");
    std::fs::write(&overlay, "distance_km,reference\n0,1\n20,0.1\n").unwrap();
    let args = [
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "8",
        "--out",
        csv.to_str().unwrap(),
        "--plot",
        svg.to_str().unwrap(),
        "--overlay",
        overlay.to_str().unwrap(),
    ];
    assert!(pnqkd(&args).status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.contains("grid=0:20:10 loss_db_km=0.16"));
    assert!(text.contains("# seed: 8"));
    assert_eq!(column(&text, "distance_km"), vec![0.0, 10.0, 20.0]);
    let svg = std::fs::read_to_string(&svg).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("reference"));
}
