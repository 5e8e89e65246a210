use std::path::{Path, PathBuf};

use super::run::MANIFEST_NAME;
use super::schema::{ExperimentFile, ExperimentRecord, SCHEMA_VERSION};
use super::ExperimentParams;
use crate::circuit::{self, QuantumCircuit};
use crate::error::{Error, Result};
use crate::qsim::NoiseModel;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetFilter {
    /// Keep only these grid sizes.
    pub dims: Option<Vec<usize>>,
    /// Inclusive viscosity range.
    pub nu_range: Option<(f64, f64)>,
    pub require_zne: bool,
    pub require_hardware: bool,
}

impl DatasetFilter {
    fn admits_params(&self, r: &ExperimentRecord) -> bool {
        if let Some(dims) = &self.dims {
            if !dims.contains(&r.grid.n) {
                return false;
            }
        }
        if let Some((lo, hi)) = self.nu_range {
            if r.params.nu < lo || r.params.nu > hi {
                return false;
            }
        }
        true
    }
}

/// One snapshot paired with everything the corrector needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub key: String,
    pub params: ExperimentParams,
    pub t: f64,
    pub circuit: QuantumCircuit,
    pub noise: NoiseModel,
    pub shots: u64,
    pub classical: Vec<f64>,
    pub noisy: Vec<f64>,
    pub zne: Option<Vec<f64>>,
    pub hardware: Option<Vec<f64>>,
}

impl TrainingSample {
    pub fn n_grid(&self) -> usize {
        self.params.n_grid
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedDataset {
    pub samples: Vec<TrainingSample>,
    /// `(record key or file, reason)` for everything that was left out.
    pub skipped: Vec<(String, String)>,
}

fn experiment_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_json = path.extension().is_some_and(|e| e == "json");
        let is_manifest = path.file_name().is_some_and(|n| n == MANIFEST_NAME);
        if path.is_file() && is_json && !is_manifest {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn sample_from(
    file: &ExperimentFile,
    r: &ExperimentRecord,
    dir: &Path,
    filter: &DatasetFilter,
) -> std::result::Result<Option<TrainingSample>, String> {
    if !filter.admits_params(r) {
        return Ok(None);
    }
    if let Some(e) = &r.error {
        return Err(format!("record carries an error: {e}"));
    }
    let o = &r.outputs;
    let classical = o.classical.as_ref().ok_or("no classical output")?;
    let noisy = o.sim_noisy.as_ref().ok_or("no noisy output")?;
    let zne = o.sim_zne.as_ref().map(|z| z.field.clone());
    let hardware = o.hardware.as_ref().map(|h| h.field.clone());
    if filter.require_zne && zne.is_none() {
        return Err("ZNE output required".into());
    }
    if filter.require_hardware && hardware.is_none() {
        return Err("hardware output required".into());
    }
    let circ_ref = r
        .circuits
        .noisy
        .as_ref()
        .ok_or("no noisy circuit reference")?;
    let circ_path = dir.join(&file.output_dir).join(&circ_ref.path);
    let text =
        std::fs::read_to_string(&circ_path).map_err(|e| format!("{}: {e}", circ_path.display()))?;
    let circuit = circuit::parse_circuit(&text).map_err(|e| e.to_string())?;
    Ok(Some(TrainingSample {
        key: r.key.clone(),
        params: ExperimentParams {
            nu: r.params.nu,
            dt: r.params.dt,
            n_grid: r.grid.n,
            u_left: r.params.u_left,
            u_right: r.params.u_right,
            epsilon: r.params.epsilon,
        },
        t: r.t,
        circuit,
        noise: file.noise,
        shots: noisy.shots,
        classical: classical.field.clone(),
        noisy: noisy.field.clone(),
        zne,
        hardware,
    }))
}

/// Loads every experiment file in `dir` in file-name order, keeping record
/// order within each file.
pub fn load_dataset(dir: &Path, filter: &DatasetFilter) -> Result<LoadedDataset> {
    let mut out = LoadedDataset::default();
    for path in experiment_files(dir)? {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let file: ExperimentFile = match serde_json::from_str(&text) {
            Ok(f) => f,
            Err(e) => {
                out.skipped
                    .push((name, format!("not an experiment file: {e}")));
                continue;
            }
        };
        if file.schema.version != SCHEMA_VERSION {
            out.skipped.push((
                name,
                format!("unknown schema version {}", file.schema.version),
            ));
            continue;
        }
        for r in &file.records {
            match sample_from(&file, r, dir, filter) {
                Ok(Some(s)) => out.samples.push(s),
                Ok(None) => {}
                Err(reason) => out.skipped.push((r.key.clone(), reason)),
            }
        }
    }
    Ok(out)
}
