use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mitigation::ZneConfig;
use crate::pde::{self, Diagnostics, VelocityField};
use crate::qsim::NoiseModel;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaBlock {
    pub version: u32,
    pub task: String,
    pub fields: Vec<String>,
}

impl SchemaBlock {
    pub fn current() -> Self {
        Self {
            version: SCHEMA_VERSION,
            task: "viscous Burgers: classical Cole-Hopf reference vs noisy Trotterized quantum simulation with zero-noise extrapolation".into(),
            fields: [
                "time_set_index",
                "time_index",
                "t",
                "key",
                "grid",
                "params",
                "trotter",
                "circuits",
                "metrics",
                "outputs",
                "seeds",
                "noiseless_reconstruction_residual",
                "error",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentFile {
    pub schema: SchemaBlock,
    pub base_name: String,
    pub timestamp: String,
    /// Directory the relative circuit paths resolve against; always the
    /// directory holding the file.
    pub output_dir: String,
    pub hardware_used: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hardware_backend: Option<String>,
    pub n_time_sets: usize,
    pub n_records: usize,
    pub wall_time_s: f64,
    pub shots: u64,
    pub base_seed: u64,
    pub combo_index: u64,
    pub noise: NoiseModel,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub zne: Option<ZneSettings>,
    pub records: Vec<ExperimentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZneSettings {
    pub scales: Vec<usize>,
    pub u_min: f64,
    pub u_max: f64,
}

impl From<&ZneConfig> for ZneSettings {
    fn from(c: &ZneConfig) -> Self {
        Self {
            scales: c.scales.clone(),
            u_min: c.u_min,
            u_max: c.u_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub time_set_index: usize,
    pub time_index: usize,
    pub t: f64,
    pub key: String,
    pub grid: GridRecord,
    pub params: ParamsRecord,
    pub trotter: TrotterRecord,
    pub circuits: RecordCircuits,
    pub metrics: MetricsRecord,
    pub outputs: OutputsRecord,
    pub seeds: SeedsRecord,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noiseless_reconstruction_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub dx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub nu: f64,
    #[serde(rename = "u_L")]
    pub u_left: f64,
    #[serde(rename = "u_R")]
    pub u_right: f64,
    pub dt: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrotterRecord {
    pub theta: f64,
    pub steps: usize,
    pub alpha: f64,
    pub n_qubits: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    pub name: String,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RecordCircuits {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noisy: Option<FileRef>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub zne: Option<FileRef>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hardware: Option<FileRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitMetricsRecord {
    pub depth: usize,
    pub two_qubit_count: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsRecord {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noisy: Option<CircuitMetricsRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub zne: Option<CircuitMetricsRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub classical_shock_position: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub classical_dissipation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldOutput {
    pub field: Vec<f64>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub field: Vec<f64>,
    pub diagnostics: Diagnostics,
    pub shots: u64,
    pub counts: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareOutput {
    pub field: Vec<f64>,
    pub diagnostics: Diagnostics,
    pub shots: u64,
    pub counts: BTreeMap<String, u64>,
    pub negative_mass: f64,
    pub negative_mass_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputsRecord {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub classical: Option<FieldOutput>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sim_noisy: Option<SimOutput>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sim_zne: Option<FieldOutput>,
    /// Counts of every ZNE scale above 1, keyed by the scale.
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub zne_scale_counts: BTreeMap<String, BTreeMap<String, u64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hardware: Option<HardwareOutput>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedsRecord {
    pub snapshot: u64,
    pub per_scale: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub experiments: Vec<ManifestEntry>,
    pub circuits: Vec<ManifestEntry>,
}

const DIAG_TOL: f64 = 1e-12;

fn velocity(field: &[f64], p: &ParamsRecord) -> VelocityField {
    VelocityField {
        values: field.to_vec(),
        u_left: p.u_left,
        u_right: p.u_right,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= DIAG_TOL * (1.0 + a.abs().max(b.abs()))
}

/// Structural and numeric checks on a parsed experiment file. Returns the
/// list of violations; an empty list means the file is valid.
pub fn validate_file(file: &ExperimentFile) -> Vec<String> {
    let mut v = Vec::new();
    if file.schema.version != SCHEMA_VERSION {
        v.push(format!(
            "unknown schema version {} (expected {SCHEMA_VERSION})",
            file.schema.version
        ));
    }
    if file.n_records != file.records.len() {
        v.push(format!(
            "n_records = {} but records[] has {} entries",
            file.n_records,
            file.records.len()
        ));
    }
    if file.hardware_used != file.hardware_backend.is_some() {
        v.push("hardware_used flag disagrees with hardware_backend".into());
    }
    for (i, r) in file.records.iter().enumerate() {
        let at = |msg: String| format!("records[{i}] ({}): {msg}", r.key);
        let n = r.grid.n;
        if n < 3 {
            v.push(at(format!("grid N = {n} is below 3")));
            continue;
        }
        if !close(r.grid.dx, 1.0 / (n as f64 - 1.0)) {
            v.push(at(format!("dx = {} inconsistent with N = {n}", r.grid.dx)));
        }
        let mut check_len = |name: &str, len: usize| {
            if len != n {
                v.push(at(format!("{name} has length {len}, expected {n}")));
            }
        };
        let o = &r.outputs;
        if let Some(c) = &o.classical {
            check_len("outputs.classical.field", c.field.len());
        }
        if let Some(s) = &o.sim_noisy {
            check_len("outputs.sim_noisy.field", s.field.len());
        }
        if let Some(z) = &o.sim_zne {
            check_len("outputs.sim_zne.field", z.field.len());
        }
        if let Some(h) = &o.hardware {
            check_len("outputs.hardware.field", h.field.len());
        }
        if let Some(s) = &o.sim_noisy {
            let total: u64 = s.counts.values().sum();
            if total != s.shots {
                v.push(at(format!(
                    "sim_noisy counts sum to {total}, shots = {}",
                    s.shots
                )));
            }
        }
        if let Some(h) = &o.hardware {
            let total: u64 = h.counts.values().sum();
            if total != h.shots {
                v.push(at(format!(
                    "hardware counts sum to {total}, shots = {}",
                    h.shots
                )));
            }
        }
        if r.error.is_none() && o.classical.is_none() {
            v.push(at("classical output missing without an error".into()));
        }
        if let (Some(c), Ok(grid)) = (&o.classical, pde::build_grid(n)) {
            if c.field.len() == n {
                let u = velocity(&c.field, &r.params);
                let shock = pde::shock_position(&u, &grid);
                let diss = pde::dissipation_rate(&u, &grid, r.params.nu);
                match (
                    r.metrics.classical_shock_position,
                    r.metrics.classical_dissipation,
                ) {
                    (Some(s), Some(d)) => {
                        if !close(s, shock) {
                            v.push(at(format!(
                                "classical shock position {s} != recomputed {shock}"
                            )));
                        }
                        if !close(d, diss) {
                            v.push(at(format!(
                                "classical dissipation {d} != recomputed {diss}"
                            )));
                        }
                    }
                    _ => v.push(at("classical diagnostics missing".into())),
                }
            }
        }
        if file.zne.is_none() && (o.sim_zne.is_some() || r.circuits.zne.is_some()) {
            v.push(at("ZNE output present but ZNE disabled in header".into()));
        }
    }
    v
}

/// Reads and validates an experiment file. `Ok(violations)` is empty when
/// the file is valid.
pub fn validate_schema(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(e) => return Ok(vec![format!("invalid JSON: {e}")]),
    };
    if let Some(version) = value.pointer("/schema/version").and_then(|v| v.as_u64()) {
        if version != SCHEMA_VERSION as u64 {
            return Ok(vec![format!(
                "unknown schema version {version} (expected {SCHEMA_VERSION})"
            )]);
        }
    }
    match serde_json::from_value::<ExperimentFile>(value) {
        Ok(file) => Ok(validate_file(&file)),
        Err(e) => Ok(vec![format!("schema mismatch: {e}")]),
    }
}
