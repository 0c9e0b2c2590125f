//! End-to-end runs of the `starcert` binary: every subcommand, determinism
//! of outputs, and the on-disk interface contracts.

use std::path::Path;
use std::process::{Command, Output};

fn starcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_starcert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn synth_is_deterministic_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let run = starcert(&[
            "synth",
            "--out",
            out.to_str().unwrap(),
            "--width",
            "64",
            "--height",
            "64",
            "--instances",
            "3",
            "--passes",
            "4",
            "--r-min",
            "5",
            "--r-max",
            "9",
            "--seed",
            "7",
        ]);
        assert_ok(&run);
    }
    let bytes_a = read_dir_bytes(&a);
    let bytes_b = read_dir_bytes(&b);
    assert_eq!(bytes_a.len(), bytes_b.len());
    for ((name_a, data_a), (name_b, data_b)) in bytes_a.iter().zip(&bytes_b) {
        assert_eq!(name_a, name_b);
        assert_eq!(data_a, data_b, "{name_a} differs between identical runs");
    }
    let manifest = starcert::formats::read_manifest(&a.join("manifest.json")).unwrap();
    assert_eq!(manifest.passes, 4);
    assert_eq!(starcert::formats::load_dense(&manifest).unwrap().len(), 4);
}

#[test]
fn synth_empty_scene_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("set");
    assert_ok(&starcert(&[
        "synth",
        "--out",
        out.to_str().unwrap(),
        "--width",
        "48",
        "--height",
        "48",
        "--instances",
        "0",
        "--passes",
        "2",
        "--seed",
        "1",
    ]));
    let manifest = starcert::formats::read_manifest(&out.join("manifest.json")).unwrap();
    let sets = starcert::formats::load_instances(&manifest).unwrap();
    assert!(sets.iter().all(|s| s.predictions.is_empty()));
}

#[test]
fn cluster_fixture_reproduces_grouping() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/fig2");
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    assert_ok(&starcert(&[
        "cluster",
        "--input",
        fixture.to_str().unwrap(),
        "--method",
        "pixel",
        "--out",
        report_path.to_str().unwrap(),
    ]));
    let report = starcert::formats::read_report(&report_path).unwrap();
    let sizes: Vec<usize> = report.clusters.iter().map(|c| c.members).collect();
    assert_eq!(sizes, vec![4, 1, 3]);
    let fracs: Vec<f64> = report.clusters.iter().map(|c| c.c_frac).collect();
    assert_eq!(fracs, vec![1.0, 0.25, 0.75]);
}

#[test]
fn radial_method_on_instance_only_set_fails_cleanly() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/fig2");
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let run = starcert(&[
        "cluster",
        "--input",
        fixture.to_str().unwrap(),
        "--method",
        "radial",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert!(!run.status.success());
    assert!(!report_path.exists(), "failed run must not leave outputs");
    let err = String::from_utf8_lossy(&run.stderr);
    assert!(err.contains("dense"), "stderr: {err}");
}

#[test]
fn full_pipeline_noiseless_calibration_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("set");
    assert_ok(&starcert(&[
        "synth",
        "--out",
        set.to_str().unwrap(),
        "--width",
        "96",
        "--height",
        "96",
        "--instances",
        "5",
        "--passes",
        "6",
        "--r-min",
        "6",
        "--r-max",
        "10",
        "--seed",
        "3",
    ]));
    assert_ok(&starcert(&[
        "cluster",
        "--input",
        set.to_str().unwrap(),
        "--method",
        "radial",
    ]));
    let calib_out = dir.path().join("calib");
    assert_ok(&starcert(&[
        "calibrate",
        "--input",
        set.to_str().unwrap(),
        "--out-dir",
        calib_out.to_str().unwrap(),
    ]));

    for score in ["c_spl", "c_frac", "c_hyb"] {
        let csv = std::fs::read_to_string(calib_out.join(format!("reliability_{score}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "bin_lo,bin_hi,count,mean_confidence,accuracy"
        );
        assert_eq!(lines.count(), 10, "one row per bin");
        let svg = std::fs::read_to_string(calib_out.join(format!("reliability_{score}.svg"))).unwrap();
        assert!(svg.starts_with("<svg"));
    }
    assert!(calib_out.join("overlay.svg").exists());
    let report = starcert::formats::read_report(&calib_out.join("report.json")).unwrap();
    let calibration = report.calibration.expect("calibration section present");
    for (_, summary) in calibration.scores {
        assert_eq!(summary.ece, 0.0);
        assert_eq!(summary.mce, 0.0);
        assert_eq!(summary.false_negatives, 0);
    }
}

#[test]
fn bench_csv_has_one_row_per_method_and_size() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&starcert(&[
        "bench",
        "--sizes",
        "10,20",
        "--passes",
        "3",
        "--reps",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]));
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,size,passes,total_predictions,seconds");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("bsas,10,"));
    assert!(lines[2].starts_with("radial,10,"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("bench_summary.json")).unwrap())
            .unwrap();
    assert!(summary["bsas_slope"].is_number());
    assert!(summary["radial_slope"].is_number());
}

#[test]
fn sweep_csv_shape_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        assert_ok(&starcert(&[
            "sweep-passes",
            "--f-values",
            "2,4",
            "--seeds",
            "2",
            "--instances",
            "4",
            "--width",
            "96",
            "--height",
            "96",
            "--out",
            out.to_str().unwrap(),
        ]));
    }
    let a = std::fs::read_to_string(&out_a).unwrap();
    let b = std::fs::read_to_string(&out_b).unwrap();
    assert_eq!(a, b, "identical flags must give identical CSVs");
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "f,metric,mean,stddev");
    // |F values| x 3 metrics rows.
    assert_eq!(lines.len(), 1 + 2 * 3);
}

#[test]
fn invalid_flags_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let run = starcert(&[
        "synth",
        "--out",
        dir.path().join("x").to_str().unwrap(),
        "--p-det",
        "1.5",
    ]);
    assert!(!run.status.success());
    let run = starcert(&["cluster", "--input", "/nonexistent", "--method", "pixel"]);
    assert!(!run.status.success());
}
