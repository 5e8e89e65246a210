//! End to end: generate a dimension-16 dataset, train the lightcone-masked
//! corrector, checkpoint it and print the evaluation table.
//!
//! ```text
//! cargo run --release --example train_corrector -- 60
//! ```

use qburgers::dataset::{self, load_dataset, run_sweep, DatasetFilter, RunSettings, NU_VALUES};
use qburgers::qagt::{self, GroupBy, ModelConfig, TrainConfig};

fn main() -> qburgers::Result<()> {
    let epochs: usize = std::env::args()
        .nth(1)
        .map_or(60, |s| s.parse().expect("epochs"));
    let dir = std::env::temp_dir().join("qburgers-train-example");
    let _ = std::fs::remove_dir_all(&dir);
    let combos = dataset::sweep(&NU_VALUES, &[1e-3], &[16], &[1.0, 2.0]);
    let settings = RunSettings {
        timestamp: Some("2025-01-01T00:00:00Z".into()),
        ..RunSettings::default()
    };
    run_sweep(&combos, &settings, &dir, 2)?;
    let data = load_dataset(
        &dir,
        &DatasetFilter {
            dims: Some(vec![16]),
            ..DatasetFilter::default()
        },
    )?;

    let cfg = ModelConfig::new(16);
    let tc = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let outcome = qagt::train(&data.samples, &cfg, &tc)?;
    for s in outcome.history.iter().step_by(10.max(epochs / 10)) {
        println!(
            "epoch {:>3} train {:.3e} val {:.3e} val MAE {:.4}",
            s.epoch, s.train_loss, s.val_loss, s.val_mae
        );
    }

    let ckpt = dir.join("corrector.json");
    qagt::save_checkpoint(&outcome.params, &ckpt)?;
    let params = qagt::load_checkpoint(&ckpt)?;
    let held_out: Vec<_> = data
        .samples
        .iter()
        .filter(|s| outcome.val_keys.contains(&s.key))
        .cloned()
        .collect();
    let report = qagt::evaluate(&params, &held_out)?;
    print!("{}", report.to_csv(GroupBy::NuRegime));
    println!("checkpoint: {}", ckpt.display());
    Ok(())
}
