//! Parameter sweep orchestration, the JSON experiment schema and loading of
//! paired training samples.

mod load;
mod run;
mod schema;

pub use load::{load_dataset, DatasetFilter, LoadedDataset, TrainingSample};
pub use run::{
    run_experiment, run_sweep, snapshot_seed, ExperimentOutcome, RunSettings, SweepSummary,
    CIRCUIT_DIR, MANIFEST_NAME, TIMESTAMP_ENV,
};
pub use schema::{
    validate_file, validate_schema, CircuitMetricsRecord, ExperimentFile, ExperimentRecord,
    FieldOutput, FileRef, GridRecord, HardwareOutput, Manifest, ManifestEntry, MetricsRecord,
    OutputsRecord, ParamsRecord, RecordCircuits, SchemaBlock, SeedsRecord, SimOutput,
    TrotterRecord, SCHEMA_VERSION,
};

use serde::{Deserialize, Serialize};

use crate::pde::DEFAULT_EPSILON;

pub const NU_VALUES: [f64; 5] = [0.01, 0.05, 0.10, 0.15, 0.20];
pub const DT_VALUES: [f64; 4] = [5e-4, 1e-3, 1.5e-3, 2e-3];
pub const N_VALUES: [usize; 4] = [8, 16, 32, 64];
pub const UL_VALUES: [f64; 4] = [1.0, 2.0, 4.0, 6.0];

/// One point of the parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub nu: f64,
    pub dt: f64,
    pub n_grid: usize,
    pub u_left: f64,
    pub u_right: f64,
    pub epsilon: f64,
}

impl ExperimentParams {
    /// Outflow `u_right = 0` and the default reconstruction epsilon.
    pub fn new(nu: f64, dt: f64, n_grid: usize, u_left: f64) -> Self {
        Self {
            nu,
            dt,
            n_grid,
            u_left,
            u_right: 0.0,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn dx(&self) -> f64 {
        1.0 / (self.n_grid as f64 - 1.0)
    }

    /// File-name tag `nu{nu}_dt{dt}_N{N}_uL{u_L}`.
    pub fn tag(&self) -> String {
        format!(
            "nu{}_dt{}_N{}_uL{}",
            self.nu, self.dt, self.n_grid, self.u_left
        )
    }
}

/// The three nested time grids; 14 snapshots in total.
pub const TIME_SETS: [&[f64]; 3] = [
    &[0.0, 0.005, 0.010],
    &[0.0, 0.0025, 0.005, 0.0075, 0.010],
    &[0.0, 0.002, 0.004, 0.006, 0.008, 0.010],
];

pub fn snapshots_per_combo() -> usize {
    TIME_SETS.iter().map(|s| s.len()).sum()
}

/// Cartesian product of the given axes in `(nu, dt, N, u_L)` lexicographic
/// order.
pub fn sweep(nus: &[f64], dts: &[f64], ns: &[usize], uls: &[f64]) -> Vec<ExperimentParams> {
    let mut out = Vec::with_capacity(nus.len() * dts.len() * ns.len() * uls.len());
    for &nu in nus {
        for &dt in dts {
            for &n in ns {
                for &ul in uls {
                    out.push(ExperimentParams::new(nu, dt, n, ul));
                }
            }
        }
    }
    out
}

/// The full 5 x 4 x 4 x 4 sweep.
pub fn default_sweep() -> Vec<ExperimentParams> {
    sweep(&NU_VALUES, &DT_VALUES, &N_VALUES, &UL_VALUES)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sweep_shape() {
        let s = default_sweep();
        assert_eq!(s.len(), 320);
        assert_eq!(s[0], ExperimentParams::new(0.01, 5e-4, 8, 1.0));
        assert_eq!(s[1], ExperimentParams::new(0.01, 5e-4, 8, 2.0));
        assert_eq!(s[319], ExperimentParams::new(0.2, 2e-3, 64, 6.0));
        let mut tags: Vec<String> = s.iter().map(ExperimentParams::tag).collect();
        tags.sort();
        tags.dedup();
        assert_eq!(tags.len(), 320);
    }

    #[test]
    fn time_sets_are_sorted_and_count_fourteen() {
        assert_eq!(snapshots_per_combo(), 14);
        for set in TIME_SETS {
            assert_eq!(set[0], 0.0);
            assert!(set.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn tag_format() {
        assert_eq!(
            ExperimentParams::new(0.1, 5e-4, 16, 1.0).tag(),
            "nu0.1_dt0.0005_N16_uL1"
        );
        assert_eq!(
            ExperimentParams::new(0.15, 1.5e-3, 64, 6.0).tag(),
            "nu0.15_dt0.0015_N64_uL6"
        );
    }
}
