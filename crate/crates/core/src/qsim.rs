//! Density-matrix simulation of Trotter circuits under a parametric noise
//! model, seeded shot sampling and counts-to-field reconstruction.
//!
//! Basis index `k` corresponds to qubit `q` holding bit `(k >> q) & 1`.
//! Bitstrings are the big-endian binary of `k`, so qubit `n - 1` is the
//! leftmost character.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::circuit::{Instruction, QuantumCircuit};
use crate::dataset::ExperimentParams;
use crate::error::{Error, Result};
use crate::pde::{self, Grid, VelocityField};

/// Largest register the density-matrix simulator accepts.
pub const MAX_QUBITS: usize = 10;
pub const DEFAULT_SHOTS: u64 = 8192;

/// Depolarizing gate noise plus asymmetric readout flips.
///
/// `p1` acts on every qubit right after state preparation (the circuits
/// contain no other single-qubit operations); `p2` acts on both qubits
/// after every `R_XX`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p1: f64,
    pub p2: f64,
    pub readout_p01: f64,
    pub readout_p10: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            p1: 0.001,
            p2: 0.01,
            readout_p01: 0.02,
            readout_p10: 0.02,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            p1: 0.0,
            p2: 0.0,
            readout_p01: 0.0,
            readout_p10: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p1", self.p1),
            ("p2", self.p2),
            ("readout_p01", self.readout_p01),
            ("readout_p10", self.readout_p10),
        ] {
            if !(0.0..=0.5).contains(&p) {
                return Err(Error::InvalidArgument(format!(
                    "noise probability {name} = {p} outside [0, 0.5]"
                )));
            }
        }
        Ok(())
    }

    /// Mean readout flip probability.
    pub fn readout_mean(&self) -> f64 {
        0.5 * (self.readout_p01 + self.readout_p10)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotResult {
    pub counts: BTreeMap<String, u64>,
    pub shots: u64,
    pub seed: u64,
}

impl ShotResult {
    pub fn count_of(&self, index: usize, n_qubits: usize) -> u64 {
        self.counts
            .get(&bitstring(index, n_qubits))
            .copied()
            .unwrap_or(0)
    }

    /// Register width implied by the bitstring keys.
    pub fn n_qubits(&self) -> Option<usize> {
        self.counts.keys().next().map(String::len)
    }
}

pub fn bitstring(index: usize, n_qubits: usize) -> String {
    format!("{index:0n_qubits$b}")
}

/// Hermitian, unit-trace density matrix on `n` qubits, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    dim: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_pure(state: &[Complex64]) -> Result<Self> {
        let dim = state.len();
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::Simulation(format!(
                "state length {dim} is not a power of two"
            )));
        }
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for (k, a) in state.iter().enumerate() {
            for (l, b) in state.iter().enumerate() {
                entries[k * dim + l] = a * b.conj();
            }
        }
        Ok(Self {
            n_qubits: dim.trailing_zeros() as usize,
            dim,
            entries,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|k| self.get(k, k)).sum()
    }

    /// Largest `|rho_kl - conj(rho_lk)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.dim {
            for l in k..self.dim {
                worst = worst.max((self.get(k, l) - self.get(l, k).conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = DMatrix::from_fn(self.dim, self.dim, |r, c| {
            0.5 * (self.get(r, c) + self.get(c, r).conj())
        });
        m.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Computational-basis probabilities, clamped at zero.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim).map(|k| self.get(k, k).re.max(0.0)).collect()
    }

    fn apply_rxx(&mut self, a: usize, b: usize, theta: f64) {
        let mask = (1usize << a) | (1usize << b);
        let c = (0.5 * theta).cos();
        let s = (0.5 * theta).sin();
        let minus_is = Complex64::new(0.0, -s);
        let plus_is = Complex64::new(0.0, s);
        let dim = self.dim;
        // rho <- U rho: mixes rows k and k ^ mask
        for k in 0..dim {
            let kp = k ^ mask;
            if kp < k {
                continue;
            }
            for l in 0..dim {
                let x = self.entries[k * dim + l];
                let y = self.entries[kp * dim + l];
                self.entries[k * dim + l] = c * x + minus_is * y;
                self.entries[kp * dim + l] = c * y + minus_is * x;
            }
        }
        // rho <- rho U^dagger: mixes columns l and l ^ mask
        for l in 0..dim {
            let lp = l ^ mask;
            if lp < l {
                continue;
            }
            for k in 0..dim {
                let x = self.entries[k * dim + l];
                let y = self.entries[k * dim + lp];
                self.entries[k * dim + l] = c * x + plus_is * y;
                self.entries[k * dim + lp] = c * y + plus_is * x;
            }
        }
    }

    /// `rho <- (1 - p) rho + p Tr_Q(rho) (x) I_Q / 2^|Q|`.
    fn depolarize(&mut self, qubits: &[usize], p: f64) {
        if p == 0.0 {
            return;
        }
        let qmask: usize = qubits.iter().map(|q| 1usize << q).sum();
        let sub: Vec<usize> = (0..self.dim).filter(|a| a & !qmask == 0).collect();
        let d = sub.len() as f64;
        let dim = self.dim;
        let mut out = self.entries.clone();
        for k in 0..dim {
            for l in 0..dim {
                let idx = k * dim + l;
                out[idx] *= 1.0 - p;
                if k & qmask != l & qmask {
                    continue;
                }
                let (kr, lr) = (k & !qmask, l & !qmask);
                let partial: Complex64 = sub
                    .iter()
                    .map(|&a| self.entries[(kr | a) * dim + (lr | a)])
                    .sum();
                out[idx] += p * partial / d;
            }
        }
        self.entries = out;
    }
}

fn check_register(circuit: &QuantumCircuit) -> Result<&[f64]> {
    if circuit.n_qubits() > MAX_QUBITS {
        return Err(Error::Simulation(format!(
            "{} qubits exceeds the simulator limit of {MAX_QUBITS}",
            circuit.n_qubits()
        )));
    }
    circuit
        .initial_amplitudes()
        .ok_or_else(|| Error::Simulation("circuit has no initialize instruction".into()))
}

/// Ideal pure-state evolution; measurement is ignored.
pub fn simulate_statevector(circuit: &QuantumCircuit) -> Result<Vec<Complex64>> {
    let init = check_register(circuit)?;
    let mut psi: Vec<Complex64> = init.iter().map(|a| Complex64::new(*a, 0.0)).collect();
    for (a, b, theta) in circuit.rxx_gates() {
        let mask = (1usize << a) | (1usize << b);
        let c = (0.5 * theta).cos();
        let minus_is = Complex64::new(0.0, -(0.5 * theta).sin());
        for k in 0..psi.len() {
            let kp = k ^ mask;
            if kp > k {
                let (x, y) = (psi[k], psi[kp]);
                psi[k] = c * x + minus_is * y;
                psi[kp] = c * y + minus_is * x;
            }
        }
    }
    Ok(psi)
}

pub fn simulate_noisy(circuit: &QuantumCircuit, noise: &NoiseModel) -> Result<DensityMatrix> {
    noise.validate()?;
    let init = check_register(circuit)?;
    let psi: Vec<Complex64> = init.iter().map(|a| Complex64::new(*a, 0.0)).collect();
    let mut rho = DensityMatrix::from_pure(&psi)?;
    for inst in circuit.instructions() {
        match inst {
            Instruction::Initialize(_) => {
                for q in 0..circuit.n_qubits() {
                    rho.depolarize(&[q], noise.p1);
                }
            }
            Instruction::Rxx { a, b, theta } => {
                rho.apply_rxx(*a, *b, *theta);
                rho.depolarize(&[*a, *b], noise.p2);
            }
            Instruction::Barrier | Instruction::MeasureAll => {}
        }
    }
    Ok(rho)
}

/// Outcome distribution after the per-bit readout confusion
/// `[[1 - p01, p10], [p01, 1 - p10]]`.
pub fn outcome_probabilities(rho: &DensityMatrix, noise: &NoiseModel) -> Vec<f64> {
    let mut probs = rho.probabilities();
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        probs.iter_mut().for_each(|p| *p /= total);
    }
    apply_readout(&mut probs, rho.n_qubits(), noise);
    probs
}

fn apply_readout(probs: &mut [f64], n_qubits: usize, noise: &NoiseModel) {
    let (p01, p10) = (noise.readout_p01, noise.readout_p10);
    if p01 == 0.0 && p10 == 0.0 {
        return;
    }
    for q in 0..n_qubits {
        let bit = 1usize << q;
        for k in 0..probs.len() {
            if k & bit != 0 {
                continue;
            }
            let (zero, one) = (probs[k], probs[k | bit]);
            probs[k] = (1.0 - p01) * zero + p10 * one;
            probs[k | bit] = p01 * zero + (1.0 - p10) * one;
        }
    }
}

/// Multinomial draw of `shots` outcomes, deterministic in `seed`.
pub fn sample_counts(
    rho: &DensityMatrix,
    shots: u64,
    noise: &NoiseModel,
    seed: u64,
) -> Result<ShotResult> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    noise.validate()?;
    let probs = outcome_probabilities(rho, noise);
    let draws = multinomial(&probs, shots, seed)?;
    let counts = draws
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(k, c)| (bitstring(k, rho.n_qubits()), c))
        .collect();
    Ok(ShotResult {
        counts,
        shots,
        seed,
    })
}

pub(crate) fn multinomial(probs: &[f64], shots: u64, seed: u64) -> Result<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining = shots;
    let mut mass: f64 = probs.iter().sum();
    let mut out = vec![0u64; probs.len()];
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == probs.len() {
            out[k] = remaining;
            break;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = Binomial::new(remaining, q)
            .map_err(|e| Error::Simulation(format!("binomial({remaining}, {q}): {e}")))?
            .sample(&mut rng);
        out[k] = draw;
        remaining -= draw;
        mass -= p;
    }
    Ok(out)
}

/// `psi_k = sqrt(counts(b_k) / shots)` over the first `n_grid` indices,
/// renormalized over those entries.
pub fn counts_to_amplitudes(result: &ShotResult, n_grid: usize) -> Result<Vec<f64>> {
    let n_qubits = result.n_qubits().ok_or(Error::EmptySupport(n_grid))?;
    if n_grid > 1 << n_qubits {
        return Err(Error::InvalidArgument(format!(
            "grid of {n_grid} points does not fit in {n_qubits} qubits"
        )));
    }
    let shots = result.shots as f64;
    let mut psi: Vec<f64> = (0..n_grid)
        .map(|k| (result.count_of(k, n_qubits) as f64 / shots).sqrt())
        .collect();
    let norm = psi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::EmptySupport(n_grid));
    }
    psi.iter_mut().for_each(|v| *v /= norm);
    Ok(psi)
}

pub fn quantum_velocity(
    result: &ShotResult,
    params: &ExperimentParams,
    grid: &Grid,
) -> Result<VelocityField> {
    let psi = counts_to_amplitudes(result, grid.n_points())?;
    pde::reconstruct_velocity(
        &psi,
        params.nu,
        grid,
        params.u_left,
        params.u_right,
        params.epsilon,
    )
}

/// Total variation distance between two distributions of equal length.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Stable 64-bit seed derived from a base seed and a path of indices.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix(base ^ 0x5155_4255_5247_4552);
    for &p in parts {
        state = splitmix(state ^ splitmix(p.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    state
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One record of an external hardware-counts file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HardwareEntry {
    Counts {
        shots: u64,
        counts: BTreeMap<String, u64>,
    },
    Quasi {
        #[serde(default = "default_shots")]
        shots: u64,
        quasi_dist: BTreeMap<u64, f64>,
    },
}

fn default_shots() -> u64 {
    DEFAULT_SHOTS
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedCounts {
    pub result: ShotResult,
    /// Total probability mass clipped away from a quasi-distribution.
    pub negative_mass: f64,
    /// Set when more than 0.1 of the quasi-distribution was negative.
    pub negative_mass_warning: bool,
}

const NEGATIVE_MASS_WARN: f64 = 0.1;

/// Parses a whole hardware-counts file keyed by record key.
pub fn read_hardware_file(path: &Path) -> Result<BTreeMap<String, HardwareEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::HardwareCounts(format!("{}: {e}", path.display())))
}

/// Reads `record_key` from a hardware-counts JSON file: an object mapping
/// record keys to either `{"shots", "counts"}` or `{"shots"?, "quasi_dist"}`.
pub fn import_hardware_counts(
    path: &Path,
    record_key: &str,
    n_qubits: usize,
) -> Result<ImportedCounts> {
    let mut file = read_hardware_file(path)?;
    let entry = file.remove(record_key).ok_or_else(|| {
        Error::HardwareCounts(format!("no record {record_key:?} in {}", path.display()))
    })?;
    hardware_entry_to_counts(entry, n_qubits)
}

pub fn hardware_entry_to_counts(entry: HardwareEntry, n_qubits: usize) -> Result<ImportedCounts> {
    match entry {
        HardwareEntry::Counts { shots, counts } => {
            if counts
                .keys()
                .any(|k| k.len() != n_qubits || k.chars().any(|c| c != '0' && c != '1'))
            {
                return Err(Error::HardwareCounts(format!(
                    "bitstrings must have {n_qubits} binary digits"
                )));
            }
            let total: u64 = counts.values().sum();
            if total != shots || shots == 0 {
                return Err(Error::HardwareCounts(format!(
                    "counts sum to {total} but shots = {shots}"
                )));
            }
            Ok(ImportedCounts {
                result: ShotResult {
                    counts: counts.into_iter().filter(|(_, c)| *c > 0).collect(),
                    shots,
                    seed: 0,
                },
                negative_mass: 0.0,
                negative_mass_warning: false,
            })
        }
        HardwareEntry::Quasi { shots, quasi_dist } => {
            if shots == 0 {
                return Err(Error::HardwareCounts("shots must be positive".into()));
            }
            let dim = 1u64 << n_qubits;
            if let Some(bad) = quasi_dist.keys().find(|k| **k >= dim) {
                return Err(Error::HardwareCounts(format!(
                    "outcome {bad} out of range for {n_qubits} qubits"
                )));
            }
            let negative_mass: f64 = quasi_dist.values().filter(|v| **v < 0.0).map(|v| -v).sum();
            let clipped: Vec<(u64, f64)> = quasi_dist
                .into_iter()
                .map(|(k, v)| (k, if v.is_finite() { v.max(0.0) } else { 0.0 }))
                .collect();
            let mass: f64 = clipped.iter().map(|(_, v)| v).sum();
            if mass <= 0.0 {
                return Err(Error::HardwareCounts(
                    "quasi-distribution has no positive mass".into(),
                ));
            }
            let counts = largest_remainder(&clipped, mass, shots);
            Ok(ImportedCounts {
                result: ShotResult {
                    counts: counts
                        .into_iter()
                        .filter(|(_, c)| *c > 0)
                        .map(|(k, c)| (bitstring(k as usize, n_qubits), c))
                        .collect(),
                    shots,
                    seed: 0,
                },
                negative_mass,
                negative_mass_warning: negative_mass > NEGATIVE_MASS_WARN,
            })
        }
    }
}

/// Integer apportionment of `shots` proportional to `weights / mass`.
fn largest_remainder(weights: &[(u64, f64)], mass: f64, shots: u64) -> Vec<(u64, u64)> {
    let exact: Vec<f64> = weights
        .iter()
        .map(|(_, w)| w / mass * shots as f64)
        .collect();
    let mut counts: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(shots.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    weights.iter().map(|(k, _)| *k).zip(counts).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{build_trotter_circuit, Instruction, QuantumCircuit};
    use crate::classical::initial_state;

    fn basis_circuit(n: usize, index: usize) -> QuantumCircuit {
        let mut amps = vec![0.0; 1 << n];
        amps[index] = 1.0;
        let mut c = QuantumCircuit::new(n, "basis").unwrap();
        c.push(Instruction::Initialize(amps)).unwrap();
        c
    }

    #[test]
    fn zero_angle_is_identity() {
        let mut c = basis_circuit(2, 1);
        c.push(Instruction::Rxx {
            a: 0,
            b: 1,
            theta: 0.0,
        })
        .unwrap();
        let psi = simulate_statevector(&c).unwrap();
        assert_eq!(psi[1], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn single_rxx_on_ground_state() {
        let theta = 0.7;
        let mut c = basis_circuit(2, 0);
        c.push(Instruction::Rxx { a: 0, b: 1, theta }).unwrap();
        let psi = simulate_statevector(&c).unwrap();
        assert!((psi[0] - Complex64::new((theta / 2.0).cos(), 0.0)).norm() < 1e-15);
        assert!((psi[3] - Complex64::new(0.0, -(theta / 2.0).sin())).norm() < 1e-15);
        assert!(psi[1].norm() < 1e-15 && psi[2].norm() < 1e-15);
    }

    #[test]
    fn missing_initialize_rejected() {
        let c = QuantumCircuit::new(2, "bare").unwrap();
        assert!(simulate_statevector(&c).is_err());
        assert!(simulate_noisy(&c, &NoiseModel::default()).is_err());
    }

    #[test]
    fn register_limit() {
        let c = basis_circuit(11, 0);
        assert!(simulate_noisy(&c, &NoiseModel::default()).is_err());
    }

    #[test]
    fn noiseless_density_matches_projector() {
        let p = ExperimentParams::new(0.15, 2e-3, 16, 2.0);
        let phi0 = initial_state(&p).unwrap().2;
        let c = build_trotter_circuit(&p, 0.01, 1, &phi0).unwrap();
        let psi = simulate_statevector(&c).unwrap();
        let rho = simulate_noisy(&c, &NoiseModel::noiseless()).unwrap();
        for k in 0..psi.len() {
            for l in 0..psi.len() {
                assert!((rho.get(k, l) - psi[k] * psi[l].conj()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn full_two_qubit_depolarizing_is_maximally_mixed() {
        let mut c = basis_circuit(2, 0);
        c.push(Instruction::Rxx {
            a: 0,
            b: 1,
            theta: 0.3,
        })
        .unwrap();
        let noise = NoiseModel {
            p2: 1.0,
            ..NoiseModel::noiseless()
        };
        // validate() caps probabilities at 0.5, so drive the channel directly
        let mut rho = DensityMatrix::from_pure(&simulate_statevector(&c).unwrap()).unwrap();
        rho.depolarize(&[0, 1], noise.p2);
        let mut dist = 0.0;
        for k in 0..4 {
            for l in 0..4 {
                let target = if k == l { 0.25 } else { 0.0 };
                dist += (rho.get(k, l) - target).norm();
            }
        }
        assert!(dist < 1e-10);
    }

    #[test]
    fn channel_keeps_density_matrix_valid() {
        let p = ExperimentParams::new(0.2, 2e-3, 8, 6.0);
        let phi0 = initial_state(&p).unwrap().2;
        let c = build_trotter_circuit(&p, 0.01, 3, &phi0).unwrap();
        let noise = NoiseModel {
            p1: 0.05,
            p2: 0.2,
            ..NoiseModel::default()
        };
        let rho = simulate_noisy(&c, &noise).unwrap();
        assert!((rho.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        assert!(rho.hermiticity_defect() < 1e-10);
        assert!(rho.min_eigenvalue() > -1e-9);
    }

    #[test]
    fn sampling_pure_basis_state() {
        let c = basis_circuit(3, 0);
        let rho = simulate_noisy(&c, &NoiseModel::noiseless()).unwrap();
        let r = sample_counts(&rho, 1000, &NoiseModel::noiseless(), 7).unwrap();
        assert_eq!(r.counts.len(), 1);
        assert_eq!(r.counts["000"], 1000);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let p = ExperimentParams::new(0.1, 1e-3, 8, 1.0);
        let phi0 = initial_state(&p).unwrap().2;
        let c = build_trotter_circuit(&p, 0.005, 1, &phi0).unwrap();
        let rho = simulate_noisy(&c, &NoiseModel::default()).unwrap();
        let a = sample_counts(&rho, 8192, &NoiseModel::default(), 42).unwrap();
        let b = sample_counts(&rho, 8192, &NoiseModel::default(), 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts.values().sum::<u64>(), 8192);
        let c2 = sample_counts(&rho, 8192, &NoiseModel::default(), 43).unwrap();
        assert_ne!(a, c2);
    }

    #[test]
    fn readout_confusion_single_qubit() {
        let c = basis_circuit(1, 0);
        let rho = simulate_noisy(&c, &NoiseModel::noiseless()).unwrap();
        let noise = NoiseModel {
            readout_p01: 0.1,
            readout_p10: 0.3,
            ..NoiseModel::noiseless()
        };
        let p = outcome_probabilities(&rho, &noise);
        assert!((p[0] - 0.9).abs() < 1e-15 && (p[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn amplitudes_from_counts() {
        let r = ShotResult {
            counts: [("000".to_string(), 8192)].into(),
            shots: 8192,
            seed: 0,
        };
        assert_eq!(
            counts_to_amplitudes(&r, 8).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );

        let r = ShotResult {
            counts: [("000".to_string(), 4096), ("001".to_string(), 4096)].into(),
            shots: 8192,
            seed: 0,
        };
        let psi = counts_to_amplitudes(&r, 8).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((psi[0] - h).abs() < 1e-15 && (psi[1] - h).abs() < 1e-15);

        let r = ShotResult {
            counts: [("111".to_string(), 10)].into(),
            shots: 10,
            seed: 0,
        };
        assert!(matches!(
            counts_to_amplitudes(&r, 6),
            Err(Error::EmptySupport(6))
        ));
    }

    #[test]
    fn uniform_counts_give_flat_velocity() {
        let p = ExperimentParams::new(0.1, 1e-3, 8, 2.0);
        let grid = pde::build_grid(8).unwrap();
        let r = ShotResult {
            counts: (0..8).map(|k| (bitstring(k, 3), 100)).collect(),
            shots: 800,
            seed: 0,
        };
        let u = quantum_velocity(&r, &p, &grid).unwrap();
        assert_eq!(u.values[0], 2.0);
        assert_eq!(u.values[7], 0.0);
        assert!(u.values[1..7].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn quasi_distribution_clipped() {
        let entry = HardwareEntry::Quasi {
            shots: 100,
            quasi_dist: [(0, 1.04), (1, -0.04)].into(),
        };
        let imported = hardware_entry_to_counts(entry, 1).unwrap();
        assert_eq!(imported.result.count_of(0, 1), 100);
        assert_eq!(imported.result.count_of(1, 1), 0);
        assert!((imported.negative_mass - 0.04).abs() < 1e-15);
        assert!(!imported.negative_mass_warning);

        let entry = HardwareEntry::Quasi {
            shots: 100,
            quasi_dist: [(0, 0.8), (1, 0.35), (2, -0.15)].into(),
        };
        let imported = hardware_entry_to_counts(entry, 2).unwrap();
        assert!(imported.negative_mass_warning);
        assert_eq!(imported.result.counts.values().sum::<u64>(), 100);
    }

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(1, &[2, 3]), derive_seed(1, &[2, 3]));
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
        assert_ne!(derive_seed(1, &[2]), derive_seed(2, &[2]));
    }
}
