//! Circuits as gate DAGs, per-qubit lightcone masks and the feature
//! tensors consumed by the corrector model.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitMetrics, Instruction, QuantumCircuit, TrotterPlan};
use crate::dataset::ExperimentParams;
use crate::error::{Error, Result};
use crate::qsim::NoiseModel;

/// Width of a node feature row.
pub const NODE_FEATURES: usize = 8;
/// Length of the global feature vector.
pub const GLOBAL_FEATURES: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Init,
    Rxx,
    Measure,
}

impl NodeKind {
    fn label(self) -> &'static str {
        match self {
            NodeKind::Init => "init",
            NodeKind::Rxx => "rxx",
            NodeKind::Measure => "measure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateNode {
    pub id: usize,
    pub kind: NodeKind,
    pub qubits: Vec<usize>,
    pub theta: Option<f64>,
    /// ASAP layer: 0 for sources, otherwise one more than the deepest
    /// predecessor.
    pub temporal_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitDAG {
    n_qubits: usize,
    nodes: Vec<GateNode>,
    edges: Vec<(usize, usize)>,
    preds: Vec<Vec<usize>>,
    /// Measure node of each qubit, if the circuit measures.
    measure_of: Vec<Option<usize>>,
}

impl CircuitDAG {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn nodes(&self) -> &[GateNode] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Sorted `(u, v)` pairs.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn predecessors(&self, v: usize) -> &[usize] {
        &self.preds[v]
    }

    pub fn measure_node(&self, qubit: usize) -> Option<usize> {
        self.measure_of.get(qubit).copied().flatten()
    }
}

struct RawNode {
    kind: NodeKind,
    qubits: Vec<usize>,
    theta: Option<f64>,
}

/// Builds the DAG. Node ids follow the canonical order
/// `(temporal_index, kind, first qubit)`, so any reordering of the
/// instruction list that preserves per-wire order yields the same graph.
pub fn circuit_to_dag(circuit: &QuantumCircuit) -> CircuitDAG {
    let n = circuit.n_qubits();
    let mut raw = Vec::new();
    for inst in circuit.instructions() {
        match inst {
            Instruction::Initialize(_) => raw.push(RawNode {
                kind: NodeKind::Init,
                qubits: (0..n).collect(),
                theta: None,
            }),
            Instruction::Rxx { a, b, theta } => raw.push(RawNode {
                kind: NodeKind::Rxx,
                qubits: vec![*a, *b],
                theta: Some(*theta),
            }),
            Instruction::Barrier => {}
            Instruction::MeasureAll => raw.extend((0..n).map(|q| RawNode {
                kind: NodeKind::Measure,
                qubits: vec![q],
                theta: None,
            })),
        }
    }

    let mut last: Vec<Option<usize>> = vec![None; n];
    let mut raw_preds: Vec<Vec<usize>> = Vec::with_capacity(raw.len());
    let mut layer = Vec::with_capacity(raw.len());
    for (i, node) in raw.iter().enumerate() {
        let mut p: Vec<usize> = node.qubits.iter().filter_map(|&q| last[q]).collect();
        p.sort_unstable();
        p.dedup();
        layer.push(p.iter().map(|&u| layer[u] + 1).max().unwrap_or(0));
        for &q in &node.qubits {
            last[q] = Some(i);
        }
        raw_preds.push(p);
    }

    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by_key(|&i| (layer[i], raw[i].kind, raw[i].qubits[0], i));
    let mut new_id = vec![0; raw.len()];
    for (id, &i) in order.iter().enumerate() {
        new_id[i] = id;
    }

    let mut nodes = Vec::with_capacity(raw.len());
    let mut preds = vec![Vec::new(); raw.len()];
    let mut edges = Vec::new();
    let mut measure_of = vec![None; n];
    for &i in &order {
        let id = new_id[i];
        let r = &raw[i];
        if r.kind == NodeKind::Measure {
            measure_of[r.qubits[0]] = Some(id);
        }
        let mut p: Vec<usize> = raw_preds[i].iter().map(|&u| new_id[u]).collect();
        p.sort_unstable();
        edges.extend(p.iter().map(|&u| (u, id)));
        preds[id] = p;
        nodes.push(GateNode {
            id,
            kind: r.kind,
            qubits: r.qubits.clone(),
            theta: r.theta,
            temporal_index: layer[i],
        });
    }
    edges.sort_unstable();
    CircuitDAG {
        n_qubits: n,
        nodes,
        edges,
        preds,
        measure_of,
    }
}

/// Per-qubit sets of node ids with a causal path to that qubit's
/// measurement. Measure nodes themselves are not members.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LightconeMasks {
    masks: Vec<BTreeSet<usize>>,
}

impl LightconeMasks {
    pub fn mask(&self, qubit: usize) -> &BTreeSet<usize> {
        &self.masks[qubit]
    }

    pub fn n_qubits(&self) -> usize {
        self.masks.len()
    }

    /// Union of the masks of every qubit whose bit is set in `index`; the
    /// union of all masks when `index` is 0.
    pub fn slot_union(&self, index: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for (q, m) in self.masks.iter().enumerate() {
            if index == 0 || (index >> q) & 1 == 1 {
                out.extend(m.iter().copied());
            }
        }
        out
    }
}

/// Reverse reachability from each measure node. Without a measurement the
/// last node on the wire stands in for it and belongs to the mask.
pub fn compute_lightcones(dag: &CircuitDAG) -> LightconeMasks {
    let mut last_on: Vec<Option<usize>> = vec![None; dag.n_qubits];
    for node in &dag.nodes {
        if node.kind != NodeKind::Measure {
            for &q in &node.qubits {
                last_on[q] = Some(node.id);
            }
        }
    }
    let masks = (0..dag.n_qubits)
        .map(|q| {
            let mut mask = BTreeSet::new();
            let mut stack: Vec<usize> = match dag.measure_of[q] {
                Some(m) => dag.preds[m].clone(),
                None => last_on[q].into_iter().collect(),
            };
            while let Some(v) = stack.pop() {
                if dag.nodes[v].kind != NodeKind::Measure && mask.insert(v) {
                    stack.extend(&dag.preds[v]);
                }
            }
            mask
        })
        .collect();
    LightconeMasks { masks }
}

/// Model inputs derived from one circuit and its experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensors {
    pub num_nodes: usize,
    /// Row-major `num_nodes x NODE_FEATURES`.
    pub node_features: Vec<f64>,
    pub edges: Vec<(usize, usize)>,
    /// `nu, dt, N, u_L, theta, M, s, depth, two-qubit count, p1, p2, readout, t`.
    pub globals: Vec<f64>,
    pub noisy_field: Vec<f64>,
    /// Range of the initial profile, `sin(pi x)` with boundary values
    /// `u_L` and `u_R`. The exact solution never leaves it.
    pub field_bounds: (f64, f64),
}

impl FeatureTensors {
    pub fn node_row(&self, v: usize) -> &[f64] {
        &self.node_features[v * NODE_FEATURES..(v + 1) * NODE_FEATURES]
    }

    /// A noisy value projected onto `field_bounds`.
    pub fn bounded(&self, x: f64) -> f64 {
        x.clamp(self.field_bounds.0, self.field_bounds.1)
    }
}

fn finite(name: &str, x: f64) -> Result<f64> {
    if x.is_nan() {
        Err(Error::InvalidArgument(format!("{name} is NaN")))
    } else {
        Ok(x)
    }
}

/// Node layout: kind one-hot (3) | qubit a / n | qubit b / n (-1 when
/// absent) | theta | temporal_index / num_nodes | local noise.
pub fn featurize(
    dag: &CircuitDAG,
    params: &ExperimentParams,
    t: f64,
    plan: &TrotterPlan,
    noise: &NoiseModel,
    metrics: &CircuitMetrics,
    noisy_field: &[f64],
) -> Result<FeatureTensors> {
    let n = dag.n_qubits as f64;
    let num_nodes = dag.num_nodes();
    let mut node_features = Vec::with_capacity(num_nodes * NODE_FEATURES);
    for node in &dag.nodes {
        let mut row = [0.0; NODE_FEATURES];
        row[node.kind as usize] = 1.0;
        let (qa, qb, local) = match node.kind {
            NodeKind::Init => (-1.0, -1.0, 0.0),
            NodeKind::Rxx => (
                node.qubits[0] as f64 / n,
                node.qubits[1] as f64 / n,
                noise.p2,
            ),
            NodeKind::Measure => (node.qubits[0] as f64 / n, -1.0, noise.readout_mean()),
        };
        row[3] = qa;
        row[4] = qb;
        row[5] = finite("theta", node.theta.unwrap_or(0.0))?;
        row[6] = node.temporal_index as f64 / num_nodes as f64;
        row[7] = finite("local noise", local)?;
        node_features.extend_from_slice(&row);
    }
    let globals = [
        ("nu", params.nu),
        ("dt", params.dt),
        ("N", params.n_grid as f64),
        ("u_L", params.u_left),
        ("theta", plan.theta),
        ("M", plan.steps as f64),
        ("s", plan.scale as f64),
        ("depth", metrics.depth as f64),
        ("two-qubit count", metrics.two_qubit_gate_count as f64),
        ("p1", noise.p1),
        ("p2", noise.p2),
        ("readout", noise.readout_mean()),
        ("t", t),
    ]
    .into_iter()
    .map(|(name, x)| finite(name, x))
    .collect::<Result<Vec<_>>>()?;
    for (j, v) in noisy_field.iter().enumerate() {
        finite(&format!("noisy_field[{j}]"), *v)?;
    }
    Ok(FeatureTensors {
        num_nodes,
        node_features,
        edges: dag.edges.clone(),
        globals,
        noisy_field: noisy_field.to_vec(),
        field_bounds: (
            params.u_left.min(params.u_right).min(0.0),
            params.u_left.max(params.u_right).max(1.0),
        ),
    })
}

/// Human-readable node and edge listing.
pub fn dag_to_edge_list(dag: &CircuitDAG) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# nodes {} qubits {}", dag.num_nodes(), dag.n_qubits);
    for node in &dag.nodes {
        let qs: Vec<String> = node.qubits.iter().map(usize::to_string).collect();
        let _ = write!(
            s,
            "{} {} q={} layer={}",
            node.id,
            node.kind.label(),
            qs.join(","),
            node.temporal_index
        );
        if let Some(theta) = node.theta {
            let _ = write!(s, " theta={theta}");
        }
        s.push('\n');
    }
    for (u, v) in &dag.edges {
        let _ = writeln!(s, "{u} -> {v}");
    }
    s
}
