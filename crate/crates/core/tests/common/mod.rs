#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qburgers::circuit::{self, Instruction, QuantumCircuit};
use qburgers::circuit_graph::{circuit_to_dag, NodeKind};
use qburgers::classical;
use qburgers::dataset::{self, ExperimentParams, TIME_SETS};

/// `exp(A)` by Taylor series with scaling and squaring.
pub fn expm_taylor(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a * scale;
    let n = a.nrows();
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..40 {
        term = &term * &x / k as f64;
        sum += &term;
        if term.abs().max() < 1e-20 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `exp(nu t L)` for the second-difference Laplacian on `n_grid` points
/// with zero boundary rows.
pub fn dense_heat_propagator(n_grid: usize, nu: f64, t: f64) -> DMatrix<f64> {
    let n = n_grid;
    let inv = ((n - 1) * (n - 1)) as f64;
    let l = DMatrix::from_fn(n, n, |i, j| {
        if i == 0 || i == n - 1 {
            0.0
        } else if i == j {
            -2.0 * inv
        } else if i.abs_diff(j) == 1 {
            inv
        } else {
            0.0
        }
    });
    expm_taylor(&(l * (nu * t)))
}

/// Product of full `2^n x 2^n` gate matrices applied to the initial state.
pub fn dense_unitary_state(c: &QuantumCircuit) -> Vec<Complex64> {
    let n = c.n_qubits();
    let dim = 1usize << n;
    let mut u = DMatrix::<Complex64>::identity(dim, dim);
    for (a, b, theta) in c.rxx_gates() {
        let flip = (1usize << a) | (1usize << b);
        let cos = Complex64::new((theta / 2.0).cos(), 0.0);
        let isin = Complex64::new(0.0, -(theta / 2.0).sin());
        let g = DMatrix::from_fn(dim, dim, |r, k| {
            if r == k {
                cos
            } else if r == k ^ flip {
                isin
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        u = g * u;
    }
    let mut psi0 = vec![Complex64::new(0.0, 0.0); dim];
    psi0[0] = Complex64::new(1.0, 0.0);
    if let Some(amps) = c.initial_amplitudes() {
        for (p, a) in psi0.iter_mut().zip(amps) {
            *p = Complex64::new(*a, 0.0);
        }
    }
    let v = nalgebra::DVector::from_vec(psi0);
    (u * v).iter().copied().collect()
}

pub fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex64>()
        .norm_sqr()
}

/// A Trotter circuit drawn from the default sweep with `N <= max_grid`.
pub fn random_sweep_circuit(
    rng: &mut ChaCha8Rng,
    max_grid: usize,
) -> (ExperimentParams, f64, QuantumCircuit) {
    let combos: Vec<_> = dataset::default_sweep()
        .into_iter()
        .filter(|p| p.n_grid <= max_grid)
        .collect();
    let p = combos[rng.random_range(0..combos.len())];
    let set = TIME_SETS[rng.random_range(0..TIME_SETS.len())];
    let t = set[rng.random_range(0..set.len())];
    let scale = if rng.random_bool(0.5) { 1 } else { 3 };
    let (_, _, phi0) = classical::initial_state(&p).unwrap();
    let c = circuit::build_trotter_circuit(&p, t, scale, &phi0).unwrap();
    (p, t, c)
}

/// Random `R_XX` circuit on arbitrary qubit pairs. Every angle is distinct
/// so gates can be matched to DAG nodes by angle.
pub fn random_rxx_circuit(
    rng: &mut ChaCha8Rng,
    n: usize,
    gates: usize,
    measure: bool,
) -> QuantumCircuit {
    let mut c = QuantumCircuit::new(n, "random").unwrap();
    let dim = 1usize << n;
    c.push(Instruction::Initialize(vec![
        1.0 / (dim as f64).sqrt();
        dim
    ]))
    .unwrap();
    for g in 0..gates {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        c.push(Instruction::Rxx {
            a,
            b,
            theta: 0.01 * (g + 1) as f64,
        })
        .unwrap();
        if rng.random_bool(0.1) {
            c.push(Instruction::Barrier).unwrap();
        }
    }
    if measure {
        c.push(Instruction::MeasureAll).unwrap();
    }
    c
}

/// Lightcone of every qubit computed from the instruction list alone:
/// transitive closure of "later operation sharing a qubit", then every
/// operation that reaches a touch of `q` (or is one).
/// Members are reported as `None` for the init node and `Some(theta)`
/// for gates.
pub fn brute_force_lightcones(c: &QuantumCircuit) -> Vec<BTreeSet<Option<u64>>> {
    let n = c.n_qubits();
    let mut ops: Vec<(Option<u64>, Vec<usize>)> = Vec::new();
    for inst in c.instructions() {
        match inst {
            Instruction::Initialize(_) => ops.push((None, (0..n).collect())),
            Instruction::Rxx { a, b, theta } => ops.push((Some(theta.to_bits()), vec![*a, *b])),
            _ => {}
        }
    }
    let m = ops.len();
    let mut reach = vec![vec![false; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            reach[i][j] = ops[i].1.iter().any(|q| ops[j].1.contains(q));
        }
        reach[i][i] = true;
    }
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n)
        .map(|q| {
            (0..m)
                .filter(|&i| (0..m).any(|j| reach[i][j] && ops[j].1.contains(&q)))
                .map(|i| ops[i].0)
                .collect()
        })
        .collect()
}

/// Library lightcones translated into the same labels.
pub fn library_lightcones(c: &QuantumCircuit) -> Vec<BTreeSet<Option<u64>>> {
    let dag = circuit_to_dag(c);
    let masks = qburgers::circuit_graph::compute_lightcones(&dag);
    let label: BTreeMap<usize, Option<u64>> = dag
        .nodes()
        .iter()
        .map(|node| {
            let l = match node.kind {
                NodeKind::Rxx => Some(node.theta.unwrap().to_bits()),
                _ => None,
            };
            (node.id, l)
        })
        .collect();
    (0..c.n_qubits())
        .map(|q| masks.mask(q).iter().map(|id| label[id]).collect())
        .collect()
}

/// Relative path -> bytes of every file below `root`.
pub fn snapshot_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
