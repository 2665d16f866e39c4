//! Behaviour of the `pathid` binary: outputs, determinism and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pathid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn assert_same_tree(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let (fa, fb) = (a.join(&name), b.join(&name));
        if fa.is_dir() {
            assert_same_tree(&fa, &fb);
        } else {
            assert_eq!(
                fs::read(&fa).unwrap(),
                fs::read(&fb).unwrap(),
                "{} differs",
                fa.display()
            );
        }
    }
}

#[test]
fn simulate_and_analyze_are_deterministic() {
    let root = tempfile::tempdir().unwrap();
    for format in ["json", "csv"] {
        let dirs = [
            root.path().join(format!("{format}_a")),
            root.path().join(format!("{format}_b")),
        ];
        for d in &dirs {
            let out = pathid(&[
                "simulate",
                "--scenario",
                "link_2m",
                "--seed",
                "11",
                "--out",
                path(d),
                "--format",
                format,
            ]);
            assert!(
                out.status.success(),
                "{}",
                String::from_utf8_lossy(&out.stderr)
            );
            let out = pathid(&[
                "analyze",
                "--scenario",
                "link_2m",
                "--seed",
                "11",
                "--out",
                path(d),
                "--format",
                format,
            ]);
            assert!(
                out.status.success(),
                "{}",
                String::from_utf8_lossy(&out.stderr)
            );
            assert!(String::from_utf8_lossy(&out.stdout).contains("coincidences"));
        }
        assert!(dirs[0].join(format!("report.{format}")).is_file());
        assert!(dirs[0].join(format!("truth.{format}")).is_file());
        assert_same_tree(&dirs[0], &dirs[1]);
    }
    // A different seed changes the data.
    let other = root.path().join("other");
    assert!(pathid(&[
        "simulate",
        "--scenario",
        "link_2m",
        "--seed",
        "12",
        "--out",
        path(&other)
    ])
    .status
    .success());
    assert_ne!(
        fs::read(other.join("coincidences.csv")).unwrap(),
        fs::read(root.path().join("json_a/coincidences.csv")).unwrap()
    );
}

#[test]
fn validation_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../scenarios/link_2m.toml"
    ))
    .unwrap()
    .replacen("gain_second = 0.01", "gain_second = -0.01", 1);
    fs::write(&bad, text).unwrap();
    let out = pathid(&["audit", "--scenario", path(&bad), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("source.gain_second"));

    let garbled = dir.path().join("garbled.toml");
    fs::write(&garbled, "[scenario\n").unwrap();
    assert_eq!(
        pathid(&["audit", "--scenario", path(&garbled)])
            .status
            .code(),
        Some(2)
    );

    // Malformed flags are usage errors.
    assert_eq!(
        pathid(&["simulate", "--scenario", "link_2m", "--format", "xml"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        pathid(&["simulate", "--scenario", "link_2m", "--seed", "-1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn degenerate_analysis_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("coincidences.csv");
    let mut csv = String::from("bin_index,bin_start_s,counts\n");
    for k in 0..1000 {
        csv.push_str(&format!("{k},{},25\n", k as f64 * 0.07));
    }
    fs::write(&trace, csv).unwrap();
    let out = pathid(&[
        "analyze",
        "--scenario",
        "link_2m",
        "--input",
        path(&trace),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("report.json").is_file());

    // Fewer than two extrapolation points cannot define a line.
    let out = pathid(&["extrapolate", "--point", "2:0.9", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn audit_and_extrapolate_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = pathid(&[
        "audit",
        "--scenario",
        "link_70m",
        "--out",
        path(dir.path()),
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("audit.csv")).unwrap();
    assert!(csv.starts_with("quantity,unit,value,reference,rel_error,gated,within_tolerance"));
    assert!(csv.contains("dc_rayleigh_length"));

    let out = pathid(&[
        "extrapolate",
        "--point",
        "2:0.9615",
        "--point",
        "20:0.9205",
        "--point",
        "70:0.8390",
        "--out",
        path(dir.path()),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("extrapolation.json")).unwrap())
            .unwrap();
    let d50 = report["distance_at_50pct"].as_f64().unwrap();
    assert!((240.0..=280.0).contains(&d50), "{d50}");
}

#[test]
fn reproduce_runs_every_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = pathid(&[
        "reproduce",
        "--seed",
        "3",
        "--out",
        path(dir.path()),
        "--format",
        "csv",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in ["link_2m", "link_20m", "link_70m"] {
        assert!(dir.path().join(name).join("report.csv").is_file());
    }
    let table = fs::read_to_string(dir.path().join("reproduce.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 9);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("optics audit: all references within 1%"),
        "{stdout}"
    );
}
