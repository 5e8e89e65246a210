use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::schema::*;
use super::{ExperimentParams, TIME_SETS};
use crate::circuit::{self, circuit_metrics, QuantumCircuit, TrotterPlan};
use crate::classical::{self, ClassicalSnapshot};
use crate::error::{Error, Result};
use crate::krylov::KrylovConfig;
use crate::mitigation::{self, ScaledExecutor, SimulatedExecutor, ZneConfig};
use crate::pde::{self, ColeHopfField, Diagnostics, Grid, VelocityField};
use crate::qsim::{self, HardwareEntry, NoiseModel, DEFAULT_SHOTS};

/// Environment variable that pins the timestamp written into experiment
/// files.
pub const TIMESTAMP_ENV: &str = "QBURGERS_TIMESTAMP";

pub const CIRCUIT_DIR: &str = "circuits";
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub noise: NoiseModel,
    pub shots: u64,
    pub base_seed: u64,
    /// Position of the combination in its sweep; enters every derived seed.
    pub combo_index: u64,
    pub zne: Option<ZneConfig>,
    pub hardware_import: Option<PathBuf>,
    pub hardware_backend: Option<String>,
    /// Fixed timestamp. When set, the recorded wall time is zero so that
    /// reruns are byte-identical.
    pub timestamp: Option<String>,
    pub krylov: KrylovConfig,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            noise: NoiseModel::default(),
            shots: DEFAULT_SHOTS,
            base_seed: 0,
            combo_index: 0,
            zne: Some(ZneConfig::default()),
            hardware_import: None,
            hardware_backend: None,
            timestamp: None,
            krylov: KrylovConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub path: PathBuf,
    pub file: ExperimentFile,
    pub circuit_paths: Vec<PathBuf>,
}

/// Seed of snapshot `(time_set, time_index)` of combination `combo`.
pub fn snapshot_seed(base: u64, combo: u64, time_set: usize, time_index: usize) -> u64 {
    qsim::derive_seed(base, &[combo, time_set as u64, time_index as u64])
}

fn record_key(params: &ExperimentParams, ts: usize, ti: usize) -> String {
    format!("{}_ts{ts}_t{ti}", params.tag())
}

fn metrics_record(c: &QuantumCircuit) -> CircuitMetricsRecord {
    let m = circuit_metrics(c);
    CircuitMetricsRecord {
        depth: m.depth,
        two_qubit_count: m.two_qubit_gate_count,
    }
}

fn write_circuit(
    out_dir: &Path,
    file_name: &str,
    c: &QuantumCircuit,
) -> Result<(FileRef, PathBuf)> {
    let rel = format!("{CIRCUIT_DIR}/{file_name}");
    let full = out_dir.join(&rel);
    std::fs::write(&full, circuit::serialize_circuit(c)).map_err(|e| Error::io(&full, e))?;
    Ok((
        FileRef {
            name: c.name().to_string(),
            path: rel,
        },
        full,
    ))
}

fn diagnostics(
    u: &VelocityField,
    grid: &Grid,
    nu: f64,
    reference: Option<&VelocityField>,
) -> Result<Diagnostics> {
    Diagnostics::compute(u, grid, nu, reference)
}

/// L2 distance between the classical field and the field reconstructed
/// from exact noiseless outcome probabilities of the nominal circuit.
fn noiseless_residual(
    c: &QuantumCircuit,
    params: &ExperimentParams,
    grid: &Grid,
    classical: &VelocityField,
) -> Result<f64> {
    let psi = qsim::simulate_statevector(c)?;
    let mut amps: Vec<f64> = psi.iter().take(grid.n_points()).map(|a| a.norm()).collect();
    let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::EmptySupport(grid.n_points()));
    }
    amps.iter_mut().for_each(|a| *a /= norm);
    let u = pde::reconstruct_velocity(
        &amps,
        params.nu,
        grid,
        params.u_left,
        params.u_right,
        params.epsilon,
    )?;
    pde::l2_error(&u, classical, grid)
}

struct SnapshotContext<'a> {
    params: &'a ExperimentParams,
    settings: &'a RunSettings,
    grid: &'a Grid,
    phi0: &'a ColeHopfField,
    out_dir: &'a Path,
    hardware: Option<&'a BTreeMap<String, HardwareEntry>>,
}

impl SnapshotContext<'_> {
    fn blank_record(&self, ts: usize, ti: usize, t: f64, seed: u64) -> ExperimentRecord {
        let p = self.params;
        let plan = TrotterPlan::new(p, t, 1).ok();
        ExperimentRecord {
            time_set_index: ts,
            time_index: ti,
            t,
            key: record_key(p, ts, ti),
            grid: GridRecord {
                n: p.n_grid,
                dx: self.grid.dx(),
            },
            params: ParamsRecord {
                nu: p.nu,
                u_left: p.u_left,
                u_right: p.u_right,
                dt: p.dt,
                epsilon: p.epsilon,
            },
            trotter: TrotterRecord {
                theta: plan.map_or(f64::NAN, |x| x.theta),
                steps: plan.map_or(0, |x| x.steps),
                alpha: plan.map_or(f64::NAN, |x| x.alpha),
                n_qubits: circuit::qubits_for(p.n_grid),
            },
            circuits: RecordCircuits::default(),
            metrics: MetricsRecord::default(),
            outputs: OutputsRecord::default(),
            seeds: SeedsRecord {
                snapshot: seed,
                per_scale: BTreeMap::new(),
            },
            noiseless_reconstruction_residual: None,
            error: None,
        }
    }

    /// Quantum phase of one snapshot; fills `record` in place so partial
    /// results survive a failure.
    fn quantum_phase(
        &self,
        record: &mut ExperimentRecord,
        classical: &VelocityField,
        written: &mut Vec<PathBuf>,
    ) -> Result<()> {
        let p = self.params;
        let s = self.settings;
        let nu = p.nu;
        let t = record.t;
        let stem = record.key.clone();

        let mut exec = SimulatedExecutor {
            params: p,
            t,
            phi0: self.phi0,
            noise: &s.noise,
            shots: s.shots,
            seed: record.seeds.snapshot,
        };
        let (noisy_u, noisy_circuit, noisy_counts, zne) = match &s.zne {
            Some(cfg) => {
                let run = mitigation::extrapolate(&mut exec, cfg)?;
                let mut scales = run.per_scale.into_iter();
                let (_, u1, (c1, r1)) = scales.next().expect("validated: at least two scales");
                let rest: Vec<_> = scales.collect();
                (u1, c1, r1, Some((run.u_zne, rest)))
            }
            None => {
                let (u, (c, r)) = exec.execute(1)?;
                (u, c, r, None)
            }
        };

        record.seeds.per_scale.insert("1".into(), noisy_counts.seed);
        let (noisy_ref, noisy_path) =
            write_circuit(self.out_dir, &format!("{stem}_noisy.qc"), &noisy_circuit)?;
        written.push(noisy_path);
        record.circuits.noisy = Some(noisy_ref.clone());
        record.metrics.noisy = Some(metrics_record(&noisy_circuit));
        record.noiseless_reconstruction_residual =
            Some(noiseless_residual(&noisy_circuit, p, self.grid, classical)?);
        record.outputs.sim_noisy = Some(SimOutput {
            diagnostics: diagnostics(&noisy_u, self.grid, nu, Some(classical))?,
            field: noisy_u.values,
            shots: noisy_counts.shots,
            counts: noisy_counts.counts,
        });

        if let Some((u_zne, rest)) = zne {
            for (scale, _, (_, result)) in &rest {
                record
                    .seeds
                    .per_scale
                    .insert(scale.to_string(), result.seed);
                record
                    .outputs
                    .zne_scale_counts
                    .insert(scale.to_string(), result.counts.clone());
            }
            if let Some((_, _, (c_top, _))) = rest.last() {
                let (zref, zpath) = write_circuit(self.out_dir, &format!("{stem}_zne.qc"), c_top)?;
                written.push(zpath);
                record.circuits.zne = Some(zref);
                record.metrics.zne = Some(metrics_record(c_top));
            }
            record.outputs.sim_zne = Some(FieldOutput {
                diagnostics: diagnostics(&u_zne, self.grid, nu, Some(classical))?,
                field: u_zne.values,
            });
        }

        if let Some(entry) = self.hardware.and_then(|h| h.get(&stem)) {
            let imported = qsim::hardware_entry_to_counts(entry.clone(), noisy_circuit.n_qubits())?;
            let u = qsim::quantum_velocity(&imported.result, p, self.grid)?;
            record.circuits.hardware = Some(noisy_ref);
            record.outputs.hardware = Some(HardwareOutput {
                diagnostics: diagnostics(&u, self.grid, nu, Some(classical))?,
                field: u.values,
                shots: imported.result.shots,
                counts: imported.result.counts,
                negative_mass: imported.negative_mass,
                negative_mass_warning: imported.negative_mass_warning,
            });
        }
        Ok(())
    }
}

fn now_rfc3339() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let days = (secs / 86_400) as i64;
    let rem = secs % 86_400;
    // civil-from-days, proleptic Gregorian
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = yoe + era * 400 + i64::from(month <= 2);
    format!(
        "{year:04}-{month:02}-{day:02}T{:02}:{:02}:{:02}Z",
        rem / 3600,
        (rem / 60) % 60,
        rem % 60
    )
}

/// Runs the classical and quantum phases for every snapshot of one
/// parameter combination and writes `<tag>.json` plus its circuit files
/// into `out_dir`.
pub fn run_experiment(
    params: &ExperimentParams,
    settings: &RunSettings,
    out_dir: &Path,
) -> Result<ExperimentOutcome> {
    let started = Instant::now();
    settings.noise.validate()?;
    if let Some(z) = &settings.zne {
        z.validate()?;
    }
    if settings.shots == 0 {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    let circuit_dir = out_dir.join(CIRCUIT_DIR);
    std::fs::create_dir_all(&circuit_dir).map_err(|e| Error::io(&circuit_dir, e))?;

    let hardware = settings
        .hardware_import
        .as_deref()
        .map(qsim::read_hardware_file)
        .transpose()?;
    let (grid, _, phi0) = classical::initial_state(params)?;
    let ctx = SnapshotContext {
        params,
        settings,
        grid: &grid,
        phi0: &phi0,
        out_dir,
        hardware: hardware.as_ref(),
    };

    let mut records = Vec::new();
    let mut written = Vec::new();
    for (ts, times) in TIME_SETS.iter().enumerate() {
        let classical: Result<Vec<ClassicalSnapshot>> =
            classical::classical_reference(params, times, &settings.krylov);
        for (ti, &t) in times.iter().enumerate() {
            let seed = snapshot_seed(settings.base_seed, settings.combo_index, ts, ti);
            let mut record = ctx.blank_record(ts, ti, t, seed);
            let snap = match &classical {
                Ok(snaps) => &snaps[ti],
                Err(e) => {
                    record.error = Some(format!("classical phase failed: {e}"));
                    records.push(record);
                    continue;
                }
            };
            record.metrics.classical_shock_position = Some(snap.diagnostics.shock_position);
            record.metrics.classical_dissipation = Some(snap.diagnostics.dissipation);
            record.outputs.classical = Some(FieldOutput {
                field: snap.velocity.values.clone(),
                diagnostics: snap.diagnostics,
            });
            if let Err(e) = ctx.quantum_phase(&mut record, &snap.velocity, &mut written) {
                record.error = Some(format!("quantum phase failed: {e}"));
            }
            records.push(record);
        }
    }

    let (timestamp, wall_time_s) = match &settings.timestamp {
        Some(ts) => (ts.clone(), 0.0),
        None => (now_rfc3339(), started.elapsed().as_secs_f64()),
    };
    let file = ExperimentFile {
        schema: SchemaBlock::current(),
        base_name: params.tag(),
        timestamp,
        output_dir: ".".into(),
        hardware_used: settings.hardware_backend.is_some(),
        hardware_backend: settings.hardware_backend.clone(),
        n_time_sets: TIME_SETS.len(),
        n_records: records.len(),
        wall_time_s,
        shots: settings.shots,
        base_seed: settings.base_seed,
        combo_index: settings.combo_index,
        noise: settings.noise,
        zne: settings.zne.as_ref().map(ZneSettings::from),
        records,
    };
    let path = out_dir.join(format!("{}.json", params.tag()));
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(ExperimentOutcome {
        path,
        file,
        circuit_paths: written,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepSummary {
    pub combos: usize,
    pub records: usize,
    pub failed_records: usize,
    pub files: Vec<PathBuf>,
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Runs every combination (in parallel on `jobs` workers) and writes a
/// manifest once all files exist.
pub fn run_sweep(
    combos: &[ExperimentParams],
    settings: &RunSettings,
    out_dir: &Path,
    jobs: usize,
) -> Result<SweepSummary> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<ExperimentOutcome>> = pool.install(|| {
        combos
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let s = RunSettings {
                    combo_index: i as u64,
                    ..settings.clone()
                };
                run_experiment(p, &s, out_dir)
            })
            .collect()
    });

    let mut experiments = Vec::new();
    let mut circuits = Vec::new();
    let mut records = 0;
    let mut failed = 0;
    let mut files = Vec::new();
    for outcome in outcomes {
        let outcome = outcome?;
        records += outcome.file.records.len();
        failed += outcome
            .file
            .records
            .iter()
            .filter(|r| r.error.is_some())
            .count();
        experiments.push(outcome.path.clone());
        circuits.extend(outcome.circuit_paths);
        files.push(outcome.path);
    }
    experiments.sort();
    circuits.sort();
    let entry = |p: &PathBuf| -> Result<ManifestEntry> {
        Ok(ManifestEntry {
            path: p
                .strip_prefix(out_dir)
                .unwrap_or(p)
                .to_string_lossy()
                .replace('\\', "/"),
            sha256: sha256_hex(p)?,
        })
    };
    let manifest = Manifest {
        version: SCHEMA_VERSION,
        experiments: experiments.iter().map(entry).collect::<Result<_>>()?,
        circuits: circuits.iter().map(entry).collect::<Result<_>>()?,
    };
    let manifest_path = out_dir.join(MANIFEST_NAME);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    files.sort();
    Ok(SweepSummary {
        combos: combos.len(),
        records,
        failed_records: failed,
        files,
    })
}
