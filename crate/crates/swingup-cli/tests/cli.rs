//! End-to-end checks of the command-line surface: exit codes, file
//! handling, and a small full-pipeline smoke run.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swingup"))
}

#[test]
fn catalog_prints_33_rows() {
    let out = bin().arg("catalog").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 34);
    assert!(text.starts_with("id,friction,mass_g,com_mm,moi_gm2"));
}

#[test]
fn unknown_flag_exits_2() {
    let out = bin().args(["catalog", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_exits_3() {
    let out = bin()
        .args([
            "eval",
            "--model",
            "/nonexistent/m.sbnt",
            "--data",
            "/nonexistent/d.swng",
            "--split",
            "seen",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn version_mismatch_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.swng");
    let mut bytes = Vec::new();
    bytes.extend_from_slice(b"SWNG");
    bytes.extend_from_slice(&99u32.to_le_bytes());
    bytes.extend_from_slice(&0u32.to_le_bytes());
    std::fs::write(&data, bytes).unwrap();

    let model = dir.path().join("m.sbnt");
    std::fs::write(&model, b"SBNT\x07\x00\x00\x00").unwrap();
    std::fs::write(dir.path().join("m.sbnt.meta"), "variant=none\n").unwrap();

    let out = bin()
        .args(["eval", "--model"])
        .arg(&model)
        .arg("--data")
        .arg(&data)
        .args(["--split", "seen"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn numeric_failure_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    // A gripper that re-tightens after one integration step can never reach
    // the calibration target, so the impulse search cannot bracket.
    let out = bin()
        .args(["calibrate", "--out"])
        .arg(&cfg)
        .args(["--set", "sim.t_stop=1e-4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

/// calibrate → gen → train(none) → eval → swingup(oracle) on real files.
/// The cheap variant keeps the smoke run to tens of seconds.
#[test]
fn full_pipeline_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    let data = dir.path().join("data.swng");
    let model = dir.path().join("none.sbnt");

    let out = bin().args(["calibrate", "--out"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "calibrate: {}", String::from_utf8_lossy(&out.stderr));
    let cfg_text = std::fs::read_to_string(&cfg).unwrap();
    assert!(cfg_text.contains("sim.l_imp="));

    let out = bin()
        .args(["gen", "--seed", "5", "--out"])
        .arg(&data)
        .args(["--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "gen: {}", String::from_utf8_lossy(&out.stderr));
    assert!(data.metadata().unwrap().len() > 1_000_000);

    let out = bin()
        .args(["train", "--variant", "none", "--split", "seen", "--epochs", "2", "--quiet"])
        .args(["--data"])
        .arg(&data)
        .args(["--out"])
        .arg(&model)
        .args(["--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "train: {}", String::from_utf8_lossy(&out.stderr));
    assert!(Path::new(&model).exists());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("config_fingerprint="), "{stdout}");

    let out = bin()
        .args(["eval", "--model"])
        .arg(&model)
        .args(["--data"])
        .arg(&data)
        .args(["--split", "seen", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "eval: {}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("none,seen,"), "{report}");

    // Closed loop with the simulator as its own predictor; coarse grid for
    // speed, one trial per goal.
    let loop_csv = dir.path().join("loop.csv");
    let out = bin()
        .args(["swingup", "--model"])
        .arg(&model)
        .args(["--oracle", "--trials", "1", "--samples", "41", "--goals", "45,90", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&loop_csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "swingup: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&loop_csv).unwrap();
    // 6 objects × 2 goals × 1 trial = 12 rows plus headers and summary.
    assert_eq!(csv.lines().filter(|l| l.split(',').count() == 6 && !l.starts_with("object_id")).count(), 12);
    assert!(csv.contains("grand_mean,"));
}

#[test]
fn gen_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.swng");
    let b = dir.path().join("b.swng");
    for path in [&a, &b] {
        let out = bin()
            .args(["gen", "--seed", "9", "--out"])
            .arg(path)
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
