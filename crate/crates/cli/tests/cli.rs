use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eggbeater"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .env("EGGBEATER_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn parse_csv(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn certify_surface_at_ten() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["certify", "--A", "10", "--mode", "surface"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(dir.path().join("certificate.json")).unwrap();
    let cert: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(cert["paper_lower_bound"].as_f64(), Some(18.0));
    assert_eq!(cert["mode"], "surface");
    assert_eq!(cert["classes"].as_array().unwrap().len(), 2);
    assert!((cert["upper_bound"].as_f64().unwrap() - 20.0).abs() < 1e-3);
}

#[test]
fn torus_below_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["certify", "--A", "2", "--mode", "torus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("certificate.json").exists());
}

#[test]
fn bad_arguments_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(dir.path(), &["orbits", "--A", "10", "--class", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(dir.path(), &["orbits", "--A", "10", "--class", "0,0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn orbits_first_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["orbits", "--A", "10", "--class", "1,0"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = parse_csv(&fs::read_to_string(dir.path().join("orbits.csv")).unwrap());
    assert_eq!(rows.len(), 4);
    let x: f64 = rows[0][2].parse().unwrap();
    let y: f64 = rows[0][3].parse().unwrap();
    assert!(x.abs() < 1e-9 && (y + 0.001).abs() < 1e-9, "({x}, {y})");
}

#[test]
fn outputs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["profile", "--resolution", "200"],
        &["figure-data", "--resolution", "200"],
        &["spectrum", "--A", "10", "--class", "0,1", "--mode", "torus"],
        &["certify", "--A", "5", "--mode", "torus"],
        &["sweep", "--A-list", "3,5,10"],
    ];
    for args in cases {
        assert_eq!(run(a.path(), args).status.code(), Some(0), "{args:?}");
        assert_eq!(run(b.path(), args).status.code(), Some(0), "{args:?}");
    }
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 8);
    for name in names {
        let x = fs::read(a.path().join(&name)).unwrap();
        let y = fs::read(b.path().join(&name)).unwrap();
        assert_eq!(x, y, "{name:?} differs");
    }
}

#[test]
fn sweep_summary_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["surface", "torus"] {
        let out = run(
            dir.path(),
            &["sweep", "--A-list", "3,5,10,50", "--mode", mode],
        );
        assert_eq!(out.status.code(), Some(0));
        let rows = parse_csv(&fs::read_to_string(dir.path().join("summary.csv")).unwrap());
        let lower: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
        assert_eq!(lower.len(), 4);
        assert!(lower.windows(2).all(|w| w[1] > w[0]), "{mode}: {lower:?}");
        for r in &rows {
            let upper: f64 = r[2].parse().unwrap();
            let lo: f64 = r[1].parse().unwrap();
            assert!(upper >= lo);
        }
    }
}

#[test]
fn figure_columns() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(dir.path(), &["figure-data", "--resolution", "8"])
            .status
            .code(),
        Some(0)
    );
    let text = fs::read_to_string(dir.path().join("figure.csv")).unwrap();
    assert!(text.starts_with("t,h,h1\n"));
    let rows = parse_csv(&text);
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 1.0);
    assert_eq!(rows[4][1].parse::<f64>().unwrap(), -1.0);
}
