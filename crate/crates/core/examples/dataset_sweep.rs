//! A small reproducible sweep written to a directory, validated and loaded
//! back as training samples.
//!
//! ```text
//! cargo run --release --example dataset_sweep -- /tmp/qburgers-data
//! ```

use std::path::PathBuf;

use qburgers::dataset::{
    self, load_dataset, run_sweep, validate_schema, DatasetFilter, RunSettings,
};

fn main() -> qburgers::Result<()> {
    let out = std::env::args().nth(1).map_or_else(
        || std::env::temp_dir().join("qburgers-sweep"),
        PathBuf::from,
    );
    let combos = dataset::sweep(&[0.05, 0.1], &[1e-3], &[8, 16], &[1.0, 2.0]);
    let settings = RunSettings {
        base_seed: 1,
        timestamp: Some("2025-01-01T00:00:00Z".into()),
        ..RunSettings::default()
    };
    let summary = run_sweep(&combos, &settings, &out, 2)?;
    println!(
        "{} combos, {} records ({} failed) in {}",
        summary.combos,
        summary.records,
        summary.failed_records,
        out.display()
    );
    for f in &summary.files {
        let violations = validate_schema(f)?;
        println!(
            "  {} -> {} violations",
            f.file_name().unwrap().to_string_lossy(),
            violations.len()
        );
    }
    let loaded = load_dataset(&out, &DatasetFilter::default())?;
    println!(
        "loaded {} samples, skipped {}",
        loaded.samples.len(),
        loaded.skipped.len()
    );
    Ok(())
}
