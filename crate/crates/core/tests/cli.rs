mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{tiny_scan, write_scan, TINY_DIMS};

const TINY_TOML: &str = r#"
min_axial_slices = 20
max_axial_slices = 60
min_inplane_px = 32
seed_z_lo = 0
seed_z_hi = 29
volume_min_cm3 = 0.1
volume_max_cm3 = 5.0
fluid_min_component_voxels = 50
island_min_voxels = 50
slices_per_scan = 3
export_size_px = 64
"#;

fn colonseg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_colonseg"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env("COLONSEG_WORKERS", "1")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn bad_configuration_exits_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::create_dir(tmp.path().join("in")).unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "no_such_key = 1\n").unwrap();
    let o = colonseg(tmp.path(), &["--config", "bad.toml", "report"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let o = colonseg(tmp.path(), &["--set", "volume_min_cm3=50", "segment-air", "--input", "in", "--out", "out"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("volume_min_cm3"));

    let o = colonseg(tmp.path(), &["--config", "missing.toml", "report"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_manifest_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let o = colonseg(tmp.path(), &["split"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("manifest.jsonl").exists());
}

#[test]
fn end_to_end_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("tiny.toml"), TINY_TOML).unwrap();
    for id in ["s1", "s2", "s3"] {
        write_scan(&dir.join("in"), id, &tiny_scan(TINY_DIMS, true));
    }
    write_scan(&dir.join("in"), "flat", &tiny_scan(TINY_DIMS, false));
    let cfg = ["--config", "tiny.toml"];
    let run = |args: &[&str]| {
        let all: Vec<&str> = cfg.iter().chain(args).copied().collect();
        let o = colonseg(dir, &all);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };

    let out = run(&["segment-air", "--input", "in", "--out", "work"]);
    assert!(out.contains("included   3"), "{out}");
    assert!(out.contains("SeedNotFound"), "{out}");

    let out = run(&["report", "--json", "funnel.json"]);
    assert!(out.contains("total      4"));
    let funnel: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("funnel.json")).unwrap()).unwrap();
    assert_eq!(funnel["included"], 3);
    assert_eq!(funnel["excluded"]["SeedNotFound"], 1);

    run(&["export-slices", "--out", "slices", "--seed", "4"]);
    assert_eq!(std::fs::read_dir(dir.join("slices")).unwrap().count(), 9);

    let out = run(&["split", "--seed", "9"]);
    assert!(out.contains("train 2 / test 1"), "{out}");
    let out = run(&["export-training", "--out", "Dataset001_Colon", "--labels", "air"]);
    assert!(out.contains("2 training and 1 test"), "{out}");

    run(&["refine", "--input", "work/labels", "--out", "refined"]);
    let out = run(&["evaluate", "--method", "raw=work/labels", "--method", "refined=refined", "--reference", "work/labels", "--target", "air", "--out", "eval"]);
    assert!(out.contains("raw"));
    for f in ["summary.csv", "scans.csv", "report.json", "distance_histograms.csv"] {
        assert!(dir.join("eval").join(f).is_file(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("eval/report.json")).unwrap()).unwrap();
    assert_eq!(report["common_scans"].as_array().unwrap().len(), 3);
    let dice = &report["methods"][0]["aggregates"][0];
    assert_eq!(dice["metric"], "dice");
    assert_eq!(dice["median"], 1.0);
}
