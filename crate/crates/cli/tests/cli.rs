//! End-to-end tests of the `framedeconv` binary: exit codes, file outputs,
//! the degrade/restore round trip, and byte-level determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_framedeconv"))
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_test_image(path: &Path) {
    // small piecewise image: gradient plus a bright block
    let (rows, cols) = (32usize, 32usize);
    let mut body = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut v = 40 + (r * 2) as i32;
            if (8..20).contains(&r) && (6..22).contains(&c) {
                v = 190;
            }
            body.push(v.clamp(0, 255) as u8);
        }
    }
    let mut bytes = format!("P5\n{} {}\n255\n", cols, rows).into_bytes();
    bytes.extend_from_slice(&body);
    std::fs::write(path, bytes).unwrap();
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn frame_info_reports_tight_union() {
    let out = run(&[
        "frame-info",
        "--config",
        data_dir().join("frames/union2.json").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("tight: true"), "{text}");
    assert!(text.contains("2.000000000000"), "{text}");
}

#[test]
fn frame_info_dtt_is_non_tight() {
    let out = run(&[
        "frame-info",
        "--config",
        data_dir().join("frames/dtt_sym3.json").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("tight: false"), "{text}");
}

#[test]
fn frame_info_exit_2_on_rank_drop() {
    let out = run(&[
        "frame-info",
        "--config",
        data_dir().join("frames/dczero.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bin"), "{err}");
}

#[test]
fn missing_config_is_io_error() {
    let out = run(&["degrade", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn degrade_none_noise_matches_blur_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    write_test_image(&dir.path().join("in.pgm"));
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        r#"{
            "input_image": "in.pgm",
            "frame": "unused.json",
            "form": "af",
            "noise": {"kind": "none", "seed": 0},
            "blur": {"kind": "none"},
            "tau": 1.0,
            "output_dir": "out"
        }"#,
    );
    let out = run(&["degrade", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // with no blur and no noise the degraded signal is the input itself
    let z = framedeconv_core::image_io::read_fsig(&dir.path().join("out/degraded.fsig")).unwrap();
    let y = framedeconv_core::image_io::read_pgm(&dir.path().join("in.pgm")).unwrap();
    assert_eq!(z, y);
    let sidecar = std::fs::read_to_string(dir.path().join("out/degrade.json")).unwrap();
    assert!(sidecar.contains(r#""kind":"none""#), "{sidecar}");
    // identical input: SNR sentinel serializes as null
    assert!(sidecar.contains(r#""snr_vs_original":null"#), "{sidecar}");
}

#[test]
fn degrade_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    write_test_image(&dir.path().join("in.pgm"));
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        r#"{
            "input_image": "in.pgm",
            "frame": "unused.json",
            "form": "af",
            "noise": {"kind": "poisson", "alpha": 0.1, "seed": 11},
            "blur": {"kind": "uniform", "size": 5},
            "tau": 1.0,
            "output_dir": "out"
        }"#,
    );
    assert!(run(&["degrade", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("a").to_str().unwrap()]).status.success());
    assert!(run(&["degrade", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("b").to_str().unwrap()]).status.success());
    let a = std::fs::read(dir.path().join("a/degraded.fsig")).unwrap();
    let b = std::fs::read(dir.path().join("b/degraded.fsig")).unwrap();
    assert_eq!(a, b);
    // a different seed changes the bytes
    assert!(run(&["degrade", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("c").to_str().unwrap(), "--seed", "12"]).status.success());
    let c = std::fs::read(dir.path().join("c/degraded.fsig")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn shipped_poisson_fixture_sidecar_is_frozen() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = data_dir().join("configs/degrade_poisson.json");
    let out = run(&[
        "degrade",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sidecar = std::fs::read_to_string(dir.path().join("degrade.json")).unwrap();
    assert_eq!(
        sidecar.trim(),
        r#"{"kind":"poisson","alpha":0.1,"seed":424242,"snr_vs_original":10.14900284465227}"#
    );
}

fn restore_config(observation: bool) -> String {
    let frame = data_dir().join("frames/union2.json");
    format!(
        r#"{{
            "input_image": "in.pgm",
            "frame": "{}",
            "form": "af",
            "noise": {{"kind": "none", "seed": 0}},
            "blur": {{"kind": "none"}},
            "tau": 1e-8,
            "solver": {{"max_iter": 4000, "tol": 1e-8, "log_every": 200}},
            "output_dir": "out"{}
        }}"#,
        frame.display(),
        if observation { r#", "observation": "deg/degraded.fsig""# } else { "" }
    )
}

#[test]
fn restore_near_identity_recovers_input() {
    // no blur, no noise, vanishing tau: restored image ~ input, SNR > 60 dB
    let dir = tempfile::tempdir().unwrap();
    write_test_image(&dir.path().join("in.pgm"));
    let cfg = write_config(dir.path(), "cfg.json", &restore_config(false));
    let out = run(&["restore", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).unwrap();
    let snr_db = metrics["snr_db"].as_f64().unwrap();
    assert!(snr_db > 60.0, "snr {snr_db}");
    assert!(dir.path().join("out/restored.pgm").exists());
    assert!(dir.path().join("out/restored.fsig").exists());
    assert!(dir.path().join("out/trace.jsonl").exists());
    let file_line = std::fs::read_to_string(dir.path().join("out/metrics.json")).unwrap();
    assert_eq!(file_line.trim(), String::from_utf8_lossy(&out.stdout).trim());
}

#[test]
fn degrade_then_restore_round_trip_consumes_written_files() {
    let dir = tempfile::tempdir().unwrap();
    write_test_image(&dir.path().join("in.pgm"));
    let cfg = write_config(dir.path(), "cfg.json", &restore_config(true));
    // restore must fail before degrade has produced its observation
    let premature = run(&["restore", "--config", cfg.to_str().unwrap()]);
    assert_eq!(premature.status.code(), Some(3));
    assert!(run(&["degrade", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("deg").to_str().unwrap()]).status.success());
    let out = run(&["restore", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn restore_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_test_image(&dir.path().join("in.pgm"));
    let cfg = write_config(dir.path(), "cfg.json", &restore_config(false));
    for sub in ["a", "b"] {
        assert!(run(&["restore", "--config", cfg.to_str().unwrap(), "--out", dir.path().join(sub).to_str().unwrap()]).status.success());
    }
    for file in ["restored.fsig", "restored.pgm", "metrics.json", "trace.jsonl"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between reruns");
    }
}

#[test]
fn one_dimensional_signals_restore_via_fsig() {
    let dir = tempfile::tempdir().unwrap();
    let signal = framedeconv_core::Signal::new_1d(
        (0..64).map(|i| if (16..40).contains(&i) { 180.0 } else { 60.0 }).collect(),
    );
    framedeconv_core::image_io::write_fsig(&dir.path().join("in.fsig"), &signal).unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        &format!(
            r#"{{
                "input_image": "in.fsig",
                "frame": "{}",
                "form": "af",
                "noise": {{"kind": "laplace", "alpha": 10, "scale": 0.1, "seed": 5}},
                "blur": {{"kind": "uniform", "size": 3}},
                "tau": 0.1,
                "solver": {{"max_iter": 3000, "tol": 1e-6, "log_every": 100}},
                "output_dir": "out"
            }}"#,
            data_dir().join("frames/dtt_haar.json").display()
        ),
    );
    let out = run(&["restore", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).unwrap();
    assert!(metrics["snr_db"].as_f64().unwrap() > 10.0);
    // 1D runs produce no PGM, only the float container
    assert!(dir.path().join("out/restored.fsig").exists());
    assert!(!dir.path().join("out/restored.pgm").exists());
}

#[test]
fn oracle_check_passes() {
    let out = run(&["oracle-check"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.matches("PASS").count(), 5, "{text}");
    assert!(!text.contains("FAIL"));
}
