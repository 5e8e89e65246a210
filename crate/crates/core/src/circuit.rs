//! Circuit intermediate representation for the Trotterized diffusion
//! circuits: amplitude-encoded initial state, chains of `R_XX` rotations,
//! a barrier and a final full measurement.
//!
//! Circuits serialize to a small line-oriented text format:
//!
//! ```text
//! qcirc v1
//! name <string-no-spaces>
//! qubits <n>
//! init <2^n space-separated reals>
//! rxx <i> <j> <theta>
//! barrier
//! measure_all
//! ```
//!
//! Reals are written with 17 significant digits so parsing recovers the
//! exact `f64` values.

use std::fmt::Write as _;

use crate::dataset::ExperimentParams;
use crate::error::{Error, Result};
use crate::pde::ColeHopfField;

/// Tolerance on the norm of `Initialize` amplitudes in constructed circuits.
pub const INIT_NORM_TOL: f64 = 1e-10;
/// Looser tolerance applied when parsing text circuits.
pub const PARSE_NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    Initialize(Vec<f64>),
    Rxx { a: usize, b: usize, theta: f64 },
    Barrier,
    MeasureAll,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumCircuit {
    n_qubits: usize,
    name: String,
    instructions: Vec<Instruction>,
}

impl QuantumCircuit {
    pub fn new(n_qubits: usize, name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if n_qubits == 0 {
            return Err(Error::Circuit("circuit needs at least one qubit".into()));
        }
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::Circuit(format!(
                "circuit name must be non-empty without whitespace: {name:?}"
            )));
        }
        Ok(Self {
            n_qubits,
            name,
            instructions: Vec::new(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn initial_amplitudes(&self) -> Option<&[f64]> {
        match self.instructions.first() {
            Some(Instruction::Initialize(amps)) => Some(amps),
            _ => None,
        }
    }

    pub fn push(&mut self, inst: Instruction) -> Result<()> {
        self.check_push(&inst, INIT_NORM_TOL)?;
        self.instructions.push(inst);
        Ok(())
    }

    fn check_push(&self, inst: &Instruction, norm_tol: f64) -> Result<()> {
        if matches!(self.instructions.last(), Some(Instruction::MeasureAll)) {
            return Err(Error::Circuit(
                "no instruction may follow measure_all".into(),
            ));
        }
        match inst {
            Instruction::Initialize(amps) => {
                if !self.instructions.is_empty() {
                    return Err(Error::Circuit(
                        "initialize must be the first instruction".into(),
                    ));
                }
                if amps.len() != 1 << self.n_qubits {
                    return Err(Error::Circuit(format!(
                        "initialize expects {} amplitudes, got {}",
                        1usize << self.n_qubits,
                        amps.len()
                    )));
                }
                if amps.iter().any(|a| !a.is_finite()) {
                    return Err(Error::Circuit(
                        "initialize amplitudes must be finite".into(),
                    ));
                }
                let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > norm_tol {
                    return Err(Error::Circuit(format!(
                        "initialize amplitudes have norm {norm}, expected 1"
                    )));
                }
            }
            Instruction::Rxx { a, b, theta } => {
                if *a >= self.n_qubits || *b >= self.n_qubits {
                    return Err(Error::Circuit(format!(
                        "rxx qubits ({a}, {b}) out of range for {} qubits",
                        self.n_qubits
                    )));
                }
                if a == b {
                    return Err(Error::Circuit(format!(
                        "rxx qubits must be distinct, got {a}"
                    )));
                }
                if !theta.is_finite() {
                    return Err(Error::Circuit("rxx angle must be finite".into()));
                }
            }
            Instruction::Barrier | Instruction::MeasureAll => {}
        }
        Ok(())
    }

    /// Iterator over `(a, b, theta)` of the two-qubit gates in program order.
    pub fn rxx_gates(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.instructions.iter().filter_map(|i| match i {
            Instruction::Rxx { a, b, theta } => Some((*a, *b, *theta)),
            _ => None,
        })
    }
}

/// How a noise scale `s > 1` amplifies each entangling gate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ScalingMode {
    /// `R_XX(theta)` applied `s` times in a row.
    #[default]
    Repeat,
    /// `G (G^dagger G)^((s-1)/2)`; requires odd `s`.
    Fold,
}

/// Angle, step count, noise scale and the implied coupling of one Trotter
/// circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrotterPlan {
    pub theta: f64,
    pub steps: usize,
    pub scale: usize,
    pub alpha: f64,
}

impl TrotterPlan {
    pub fn new(params: &ExperimentParams, t: f64, scale: usize) -> Result<Self> {
        if scale == 0 {
            return Err(Error::InvalidArgument(
                "noise scale must be at least 1".into(),
            ));
        }
        if !(params.dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {}",
                params.dt
            )));
        }
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time must be nonnegative, got {t}"
            )));
        }
        let dx = 1.0 / (params.n_grid as f64 - 1.0);
        Ok(Self {
            theta: 2.0 * params.nu * params.dt / (dx * dx),
            steps: trotter_steps(t, params.dt),
            scale,
            alpha: params.nu / (dx * dx),
        })
    }
}

/// `max(1, floor(t / dt))`, with the quotient nudged so that exact
/// multiples such as `0.006 / 0.002` are not rounded down.
pub fn trotter_steps(t: f64, dt: f64) -> usize {
    let q = t / dt;
    let nudged = (q * (1.0 + 1e-9)).floor();
    (nudged as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircuitMetrics {
    pub depth: usize,
    pub two_qubit_gate_count: usize,
}

/// `ceil(log2 N)`.
pub fn qubits_for(n_points: usize) -> usize {
    n_points.next_power_of_two().trailing_zeros() as usize
}

/// Pads `phi` to `2^n` amplitudes and renormalizes.
pub fn embed_state(phi: &ColeHopfField) -> (usize, Vec<f64>) {
    let n = qubits_for(phi.len()).max(1);
    let mut amps = vec![0.0; 1 << n];
    amps[..phi.len()].copy_from_slice(phi.as_slice());
    let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    (n, amps)
}

pub fn build_trotter_circuit(
    params: &ExperimentParams,
    t: f64,
    scale: usize,
    phi0: &ColeHopfField,
) -> Result<QuantumCircuit> {
    build_trotter_circuit_with(params, t, scale, phi0, ScalingMode::Repeat)
}

pub fn build_trotter_circuit_with(
    params: &ExperimentParams,
    t: f64,
    scale: usize,
    phi0: &ColeHopfField,
    mode: ScalingMode,
) -> Result<QuantumCircuit> {
    let plan = TrotterPlan::new(params, t, scale)?;
    if mode == ScalingMode::Fold && scale.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "gate folding needs an odd scale, got {scale}"
        )));
    }
    let (n, amps) = embed_state(phi0);
    let mut circuit = QuantumCircuit::new(n, format!("trotter_M{}_s{}", plan.steps, scale))?;
    circuit.push(Instruction::Initialize(amps))?;
    for _ in 0..plan.steps {
        for i in 0..n.saturating_sub(1) {
            for rep in 0..scale {
                let theta = match mode {
                    ScalingMode::Repeat => plan.theta,
                    ScalingMode::Fold if rep % 2 == 1 => -plan.theta,
                    ScalingMode::Fold => plan.theta,
                };
                circuit.push(Instruction::Rxx {
                    a: i,
                    b: i + 1,
                    theta,
                })?;
            }
        }
    }
    circuit.push(Instruction::Barrier)?;
    circuit.push(Instruction::MeasureAll)?;
    Ok(circuit)
}

/// Depth counts two-qubit gates only: the longest chain of `R_XX` gates
/// linked through shared qubits.
pub fn circuit_metrics(circuit: &QuantumCircuit) -> CircuitMetrics {
    let mut level = vec![0usize; circuit.n_qubits()];
    let mut count = 0;
    for (a, b, _) in circuit.rxx_gates() {
        let l = level[a].max(level[b]) + 1;
        level[a] = l;
        level[b] = l;
        count += 1;
    }
    CircuitMetrics {
        depth: level.into_iter().max().unwrap_or(0),
        two_qubit_gate_count: count,
    }
}

fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn serialize_circuit(circuit: &QuantumCircuit) -> String {
    let mut out = String::new();
    out.push_str("qcirc v1\n");
    let _ = writeln!(out, "name {}", circuit.name);
    let _ = writeln!(out, "qubits {}", circuit.n_qubits);
    for inst in &circuit.instructions {
        match inst {
            Instruction::Initialize(amps) => {
                out.push_str("init");
                for a in amps {
                    out.push(' ');
                    out.push_str(&fmt_real(*a));
                }
                out.push('\n');
            }
            Instruction::Rxx { a, b, theta } => {
                let _ = writeln!(out, "rxx {a} {b} {}", fmt_real(*theta));
            }
            Instruction::Barrier => out.push_str("barrier\n"),
            Instruction::MeasureAll => out.push_str("measure_all\n"),
        }
    }
    out
}

pub fn parse_circuit(text: &str) -> Result<QuantumCircuit> {
    let err = |line: usize, message: String| Error::CircuitParse { line, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    match lines.next() {
        Some((_, "qcirc v1")) => {}
        Some((ln, other)) => {
            return Err(err(
                ln,
                format!("expected header 'qcirc v1', got {other:?}"),
            ))
        }
        None => return Err(err(0, "empty circuit file".into())),
    }
    let name = match lines.next() {
        Some((ln, l)) => l
            .strip_prefix("name ")
            .map(str::to_owned)
            .ok_or_else(|| err(ln, format!("expected 'name <string>', got {l:?}")))?,
        None => return Err(err(0, "missing name line".into())),
    };
    let n_qubits: usize = match lines.next() {
        Some((ln, l)) => l
            .strip_prefix("qubits ")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(ln, format!("expected 'qubits <n>', got {l:?}")))?,
        None => return Err(err(0, "missing qubits line".into())),
    };
    let mut circuit = QuantumCircuit::new(n_qubits, name).map_err(|e| err(2, e.to_string()))?;

    for (ln, line) in lines {
        let mut tokens = line.split_whitespace();
        let opcode = tokens.next().unwrap_or_default();
        let parse_real = |tok: &str| {
            tok.parse::<f64>()
                .map_err(|_| err(ln, format!("invalid real {tok:?}")))
        };
        let inst = match opcode {
            "init" => Instruction::Initialize(tokens.map(parse_real).collect::<Result<_>>()?),
            "rxx" => {
                let fields: Vec<&str> = tokens.collect();
                if fields.len() != 3 {
                    return Err(err(ln, "rxx expects '<i> <j> <theta>'".into()));
                }
                let qubit = |tok: &str| {
                    tok.parse::<usize>()
                        .map_err(|_| err(ln, format!("invalid qubit index {tok:?}")))
                };
                Instruction::Rxx {
                    a: qubit(fields[0])?,
                    b: qubit(fields[1])?,
                    theta: parse_real(fields[2])?,
                }
            }
            "barrier" | "measure_all" => {
                if tokens.next().is_some() {
                    return Err(err(ln, format!("{opcode} takes no operands")));
                }
                if opcode == "barrier" {
                    Instruction::Barrier
                } else {
                    Instruction::MeasureAll
                }
            }
            other => return Err(err(ln, format!("unknown opcode {other:?}"))),
        };
        circuit
            .check_push(&inst, PARSE_NORM_TOL)
            .map_err(|e| err(ln, e.to_string()))?;
        circuit.instructions.push(inst);
    }
    Ok(circuit)
}
