//! End-to-end tests of the `kflow` binary: exit codes, file contracts, and
//! manifest integrity.

use std::path::Path;
use std::process::Command;

use sha2::{Digest, Sha256};

fn kflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kflow"))
}

fn write_toy_config(path: &Path, steps: u64, conditional: bool) {
    let text = format!(
        r#"
[transform]
kind = "pca"

[partition]
bands = 2
strategy = "uniform-level"

[model]
hidden_width = 16
hidden_layers = 2
scale_embed_dim = 8
label_embed_dim = 4

[train]
batch_size = 16
steps = {steps}
seed = 7
label_conditioning = {conditional}
"#
    );
    std::fs::write(path, text).unwrap();
}

#[test]
fn help_lists_every_subcommand_and_exits_zero() {
    let out = kflow().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in [
        "gen-data",
        "fit-transform",
        "train",
        "sample",
        "edit",
        "analyze-spectrum",
        "analyze-trajectory",
        "eval-fid",
        "eval-cdr",
        "eval-recall",
    ] {
        assert!(text.contains(cmd), "--help must mention {cmd}");
    }
}

#[test]
fn subcommand_help_shows_flag_defaults() {
    let out = kflow().args(["eval-cdr", "--help"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("--rho"));
    assert!(text.contains("default"), "defaults must be visible");
}

#[test]
fn unknown_flag_exits_two_with_usage() {
    let out = kflow()
        .args(["gen-data", "--definitely-not-a-flag"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.to_lowercase().contains("usage"), "{text}");
}

#[test]
fn runtime_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = kflow()
        .args([
            "train",
            "--config",
            "/nonexistent/config.toml",
            "--data",
            "/nonexistent/data.kfc",
            "--out-dir",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pipeline_contracts_and_manifest_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.kfc");
    let config = dir.path().join("toy.toml");
    write_toy_config(&config, 30, false);

    let out = kflow()
        .args(["gen-data", "--kind", "two-gaussians", "--count", "200", "--seed", "3", "--out"])
        .arg(&data)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let run = dir.path().join("run");
    let out = kflow()
        .args(["train", "--config"])
        .arg(&config)
        .arg("--data")
        .arg(&data)
        .arg("--out-dir")
        .arg(&run)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run.join("checkpoint.kfc").exists());
    assert!(run.join("loss.csv").exists());

    // Loss log is CSV with the documented header.
    let loss = std::fs::read_to_string(run.join("loss.csv")).unwrap();
    assert!(loss.starts_with("step,loss,wall_ms\n"));
    assert_eq!(loss.lines().count(), 31, "header plus one row per step");

    // Manifest references exist and hash-match.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "train");
    for output in manifest["outputs"].as_array().unwrap() {
        let path = output["path"].as_str().unwrap();
        let bytes = std::fs::read(path).expect("manifest output exists");
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let hash = format!("{:x}", hasher.finalize());
        assert_eq!(hash, output["sha256"].as_str().unwrap(), "{path} hash-matches");
    }

    // Sampling respects the file-count contract.
    let samples = dir.path().join("samples");
    let out = kflow()
        .args(["sample", "--checkpoint"])
        .arg(run.join("checkpoint.kfc"))
        .args(["--num", "5", "--steps", "8", "--seed", "1", "--out-dir"])
        .arg(&samples)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for i in 0..5 {
        assert!(samples.join(format!("sample_{i:04}.kft")).exists());
    }
    assert!(samples.join("manifest.json").exists());

    // Threaded sampling produces byte-identical artifacts.
    let threaded = dir.path().join("samples_threaded");
    let out = kflow()
        .args(["--threads", "4", "sample", "--checkpoint"])
        .arg(run.join("checkpoint.kfc"))
        .args(["--num", "5", "--steps", "8", "--seed", "1", "--out-dir"])
        .arg(&threaded)
        .output()
        .unwrap();
    assert!(out.status.success());
    for i in 0..5 {
        let a = std::fs::read(samples.join(format!("sample_{i:04}.kft"))).unwrap();
        let b = std::fs::read(threaded.join(format!("sample_{i:04}.kft"))).unwrap();
        assert_eq!(a, b, "thread count must not change artifacts");
    }

    // eval-fid consumes the sample directory and emits a report.
    let eval = dir.path().join("eval");
    let out = kflow()
        .args(["eval-fid", "--real"])
        .arg(&data)
        .arg("--gen")
        .arg(&samples)
        .arg("--out-dir")
        .arg(&eval)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval.join("fid_report.json")).unwrap())
            .unwrap();
    assert!(report["metrics"]["fid"].as_f64().unwrap().is_finite());
    assert_eq!(report["feature_map"], "identity-flatten");
}

#[test]
fn edit_writes_exactly_num_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.kfc");
    let config = dir.path().join("toy.toml");
    write_toy_config(&config, 20, false);

    assert!(kflow()
        .args(["gen-data", "--kind", "two-gaussians", "--count", "128", "--seed", "4", "--out"])
        .arg(&data)
        .status()
        .unwrap()
        .success());
    let run = dir.path().join("run");
    assert!(kflow()
        .args(["train", "--config"])
        .arg(&config)
        .arg("--data")
        .arg(&data)
        .arg("--out-dir")
        .arg(&run)
        .status()
        .unwrap()
        .success());

    let edits = dir.path().join("edits");
    let out = kflow()
        .args(["edit", "--checkpoint"])
        .arg(run.join("checkpoint.kfc"))
        .args(["--shared-bands", "high", "--num", "6", "--seed", "9", "--steps", "8", "--out-dir"])
        .arg(&edits)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut count = 0;
    for entry in std::fs::read_dir(&edits).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        if name.starts_with("edit_") && name.ends_with(".kft") {
            count += 1;
        }
    }
    assert_eq!(count, 6, "exactly --num sample files");
    assert!(edits.join("manifest.json").exists());
}

#[test]
fn eval_cdr_with_rho_one_reports_exactly_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.kfc");
    let config = dir.path().join("cond.toml");
    write_toy_config(&config, 40, true);

    assert!(kflow()
        .args([
            "gen-data", "--kind", "labeled-mixture", "--classes", "2", "--dim", "2", "--count",
            "300", "--seed", "6", "--out",
        ])
        .arg(&data)
        .status()
        .unwrap()
        .success());
    let run = dir.path().join("run");
    assert!(kflow()
        .args(["train", "--config"])
        .arg(&config)
        .arg("--data")
        .arg(&data)
        .arg("--out-dir")
        .arg(&run)
        .status()
        .unwrap()
        .success());

    let eval = dir.path().join("cdr");
    let out = kflow()
        .args(["eval-cdr", "--checkpoint"])
        .arg(run.join("checkpoint.kfc"))
        .arg("--real")
        .arg(&data)
        .args([
            "--rho", "1.0", "--samples-per-class", "12", "--steps", "8", "--seed", "2",
            "--out-dir",
        ])
        .arg(&eval)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval.join("cdr_report.json")).unwrap())
            .unwrap();
    let cdr = report["metrics"]["cdr"].as_f64().unwrap();
    assert!((cdr - 1.0).abs() <= 1e-9, "identical paired runs give cdr 1, got {cdr}");
}

#[test]
fn kflow_seed_env_is_the_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.kfc");
    let b = dir.path().join("b.kfc");
    let c = dir.path().join("c.kfc");
    // Same env seed twice: identical bytes; explicit flag overrides it.
    for (path, extra_seed) in [(&a, None), (&b, None), (&c, Some("9"))] {
        let mut cmd = kflow();
        cmd.env("KFLOW_SEED", "1234")
            .args(["gen-data", "--kind", "two-gaussians", "--count", "64"]);
        if let Some(seed) = extra_seed {
            cmd.args(["--seed", seed]);
        }
        cmd.arg("--out").arg(path);
        assert!(cmd.status().unwrap().success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}
