use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn edof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edof"))
        .args(args)
        .env("EDOF_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"{
  "input": {"synth": {"seed": 11, "canvas": [160, 160], "max_shift": 6.0}},
  "train": {"pairs": 4, "epochs": 0, "first_grid_seed": 40},
  "output": "out"
}"#;

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON summary")
}

#[test]
fn synth_writes_views_and_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let summary = json_stdout(&edof(&["synth", "--config", cfg.to_str().unwrap(), "--json"]));
    assert_eq!(summary["views"], 9);
    let out = dir.path().join("out");
    for r in 0..3 {
        for c in 0..3 {
            assert!(out.join(format!("views/view_r{r}c{c}.png")).is_file());
        }
    }
    assert!(out.join("ground_truth.pfm").is_file());
    let truth: Value = serde_json::from_slice(&std::fs::read(out.join("ground_truth.json")).unwrap()).unwrap();
    assert_eq!(truth["homographies"].as_array().unwrap().len(), 9);
    assert!(out.join("manifest.json").is_file());
}

#[test]
fn malformed_config_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", "{\n  \"rng_seed\": 1,\n  \"output\" \"x\"\n}");
    let out = edof(&["synth", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("column"), "{err}");

    let cfg = write_config(dir.path(), "unknown.json", r#"{"blocks": {"rows": 0}}"#);
    assert_eq!(edof(&["synth", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn missing_files_exit_3() {
    let out = edof(&["synth", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(3));
    let out = edof(&["eval", "/nonexistent/image.png"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_without_network_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    assert_eq!(edof(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn untrained_network_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let cfg = cfg.to_str().unwrap();
    let summary = json_stdout(&edof(&["train", "--config", cfg, "--json"]));
    assert_eq!(summary["parameters"], 23489);
    let net = dir.path().join("out/network.edfn");
    let first = std::fs::read(&net).unwrap();
    json_stdout(&edof(&["train", "--config", cfg, "--json"]));
    assert_eq!(std::fs::read(&net).unwrap(), first);
    json_stdout(&edof(&["train", "--config", cfg, "--json", "--seed", "5"]));
    assert_ne!(std::fs::read(&net).unwrap(), first);
}

#[test]
fn run_from_directory_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "synth.json", SMALL);
    json_stdout(&edof(&["synth", "--config", cfg.to_str().unwrap(), "--json"]));
    json_stdout(&edof(&["train", "--config", cfg.to_str().unwrap(), "--json"]));

    let run_cfg = write_config(
        dir.path(),
        "run.json",
        r#"{"input": {"directory": {"path": "out"}}, "fusion": {"network": "out/network.edfn"}, "output": "run"}"#,
    );
    let summary = json_stdout(&edof(&["run", "--config", run_cfg.to_str().unwrap(), "--json"]));
    let ssim = summary["metrics"]["ssim_vs_reference"].as_f64().unwrap();
    assert!(ssim > 0.0 && ssim <= 1.0);
    let run = dir.path().join("run");
    for f in ["result.png", "report.json", "blocks/selection.json", "aligned/registration.json", "aligned/view_r1c1.png"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let report: Value = serde_json::from_slice(&std::fs::read(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["blocks"]["blocks"].as_array().unwrap().len(), 9);

    let eval = json_stdout(&edof(&["eval", run.join("result.png").to_str().unwrap(), "--json"]));
    assert!(eval["metrics"]["ie"].as_f64().unwrap() > 0.0);

    let skip = json_stdout(&edof(&["run", "--config", run_cfg.to_str().unwrap(), "--json", "--skip-align"]));
    assert_eq!(skip["canvas"], serde_json::json!([160, 160]));
}

#[test]
fn divergent_training_exits_6() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"input": {"synth": {"canvas": [160, 160], "max_shift": 6.0}},
            "train": {"pairs": 2, "epochs": 1, "batch_size": 2, "learning_rate": 1e200}}"#,
    );
    assert_eq!(edof(&["train", "--config", cfg.to_str().unwrap()]).status.code(), Some(6));
}

#[test]
fn featureless_views_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let views = dir.path().join("flat");
    std::fs::create_dir_all(&views).unwrap();
    let mut entries = Vec::new();
    for r in 0..3 {
        for c in 0..3 {
            let name = format!("v{r}{c}.png");
            image::GrayImage::from_pixel(96, 96, image::Luma([128u8])).save(views.join(&name)).unwrap();
            entries.push(serde_json::json!({"file": name, "row": r, "col": c}));
        }
    }
    let manifest = serde_json::json!({"rows": 3, "cols": 3, "views": entries});
    std::fs::write(views.join("manifest.json"), manifest.to_string()).unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"input": {"directory": {"path": "flat"}}}"#);
    assert_eq!(edof(&["align", "--config", cfg.to_str().unwrap()]).status.code(), Some(4));
}
