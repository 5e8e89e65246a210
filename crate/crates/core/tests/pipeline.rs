use std::path::Path;

use qburgers::cli;
use qburgers::dataset::{self, load_dataset, run_sweep, DatasetFilter, RunSettings};
use qburgers::qagt::{self, ModelConfig, TrainConfig};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(
        std::iter::once("qburgers").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn small_dataset(dir: &Path) {
    let combos = dataset::sweep(&[0.05, 0.1], &[1e-3, 2e-3], &[8], &[1.0]);
    let settings = RunSettings {
        shots: 1024,
        timestamp: Some("2025-01-01T00:00:00Z".into()),
        ..RunSettings::default()
    };
    run_sweep(&combos, &settings, dir, 2).unwrap();
}

#[test]
fn training_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    let data = load_dataset(dir.path(), &DatasetFilter::default()).unwrap();
    assert_eq!(data.samples.len(), 4 * 14);
    let cfg = ModelConfig {
        num_gat_layers: 1,
        attention_heads: 2,
        hidden_dim: 8,
        mlp_hidden: 16,
        ..ModelConfig::new(8)
    };
    let tc = TrainConfig {
        epochs: 6,
        seed: 5,
        ..TrainConfig::default()
    };
    let a = qagt::train(&data.samples, &cfg, &tc).unwrap();
    let b = qagt::train(&data.samples, &cfg, &tc).unwrap();
    assert_eq!(a, b);
    let c = qagt::train(&data.samples, &cfg, &TrainConfig { seed: 6, ..tc }).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn cli_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_str().unwrap();
    let (code, out, err) = run(&[
        "--out-dir",
        root,
        "--timestamp-override",
        "2025-01-01T00:00:00Z",
        "sweep",
        "--nu-list",
        "0.05,0.1",
        "--dt-list",
        "1e-3,2e-3",
        "--n-list",
        "8",
        "--ul-list",
        "1",
        "--shots",
        "1024",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("combos 4 records 56"), "{out}");

    let (code, _, err) = run(&["validate", "--data-dir", root]);
    assert_eq!(code, 0, "{err}");

    let ckpt = dir.path().join("m.json");
    let hist = dir.path().join("h.csv");
    let (code, _, err) = run(&[
        "train",
        "--data-dir",
        root,
        "--dim",
        "8",
        "--epochs",
        "3",
        "--hidden",
        "8",
        "--mlp-hidden",
        "16",
        "--layers",
        "1",
        "--heads",
        "2",
        "--checkpoint-out",
        ckpt.to_str().unwrap(),
        "--history-out",
        hist.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let history = std::fs::read_to_string(&hist).unwrap();
    assert_eq!(history.lines().count(), 4);

    let report = dir.path().join("r.csv");
    let (code, _, err) = run(&[
        "evaluate",
        "--data-dir",
        root,
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--group-by",
        "nu-regime",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(&report).unwrap();
    assert!(
        csv.starts_with("Regime,Samples,Sim Noisy,ZNE,HW Raw,Corrected(Sim),Corrected(HW),Gains"),
        "{csv}"
    );

    let (code, _, _) = run(&[
        "evaluate",
        "--data-dir",
        root,
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--nu-min",
        "5",
        "--nu-max",
        "6",
    ]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&[
        "train",
        "--data-dir",
        dir.path().join("missing").to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}
