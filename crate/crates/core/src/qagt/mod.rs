//! Graph-attention corrector: GAT layers over the circuit DAG, lightcone
//! restricted pooling per output slot and an MLP head fed with the pooled
//! embedding, the global features and the noisy field.

mod checkpoint;
mod eval;
pub mod tape;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use eval::{evaluate, gain_percent, mae, EvalReport, GroupBy, GroupSummary, SampleEval};
pub use train::{
    history_csv, train, EpochStats, LrSchedule, SplitStrategy, TrainConfig, TrainOutcome,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::circuit::{circuit_metrics, TrotterPlan};
use crate::circuit_graph::{
    circuit_to_dag, compute_lightcones, featurize, FeatureTensors, LightconeMasks, GLOBAL_FEATURES,
    NODE_FEATURES,
};
use crate::dataset::TrainingSample;
use crate::error::{Error, Result};
use tape::{Attention, Mat, Tape, Var};

const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_gat_layers: usize,
    pub attention_heads: usize,
    pub hidden_dim: usize,
    pub mlp_hidden: usize,
    pub out_dim: usize,
    pub use_lightcone_masks: bool,
}

impl ModelConfig {
    pub fn new(out_dim: usize) -> Self {
        Self {
            num_gat_layers: 3,
            attention_heads: 4,
            hidden_dim: 64,
            mlp_hidden: 128,
            out_dim,
            use_lightcone_masks: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.num_gat_layers,
            self.attention_heads,
            self.hidden_dim,
            self.mlp_hidden,
            self.out_dim,
        ];
        if dims.contains(&0) {
            return Err(Error::Model(format!(
                "model sizes must be positive: {self:?}"
            )));
        }
        if !self.hidden_dim.is_multiple_of(self.attention_heads) {
            return Err(Error::Model(format!(
                "hidden_dim {} is not divisible by {} heads",
                self.hidden_dim, self.attention_heads
            )));
        }
        Ok(())
    }

    fn head_input(&self) -> usize {
        self.hidden_dim + GLOBAL_FEATURES + self.out_dim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

impl Tensor {
    fn mat(&self) -> Mat {
        Mat::from_vec(self.shape[0], self.shape[1], self.data.clone())
    }
}

/// Fixed affine maps around the network: inputs are mapped to
/// `(x - shift) / scale`, outputs to `y * scale + shift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub globals_shift: Vec<f64>,
    pub globals_scale: Vec<f64>,
    pub field_shift: Vec<f64>,
    pub field_scale: Vec<f64>,
    pub out_shift: Vec<f64>,
    pub out_scale: Vec<f64>,
}

impl Normalization {
    pub fn identity(out_dim: usize) -> Self {
        Self {
            globals_shift: vec![0.0; GLOBAL_FEATURES],
            globals_scale: vec![1.0; GLOBAL_FEATURES],
            field_shift: vec![0.0; out_dim],
            field_scale: vec![1.0; out_dim],
            out_shift: vec![0.0; out_dim],
            out_scale: vec![1.0; out_dim],
        }
    }

    fn as_tensors(&self) -> [(&'static str, &Vec<f64>); 6] {
        [
            ("norm.globals_shift", &self.globals_shift),
            ("norm.globals_scale", &self.globals_scale),
            ("norm.field_shift", &self.field_shift),
            ("norm.field_scale", &self.field_scale),
            ("norm.out_shift", &self.out_shift),
            ("norm.out_scale", &self.out_scale),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// Trainable tensors in a fixed order.
    pub tensors: Vec<Tensor>,
    pub norm: Normalization,
}

impl ModelParams {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors
            .iter()
            .all(|t| t.data.iter().all(|x| x.is_finite()))
    }
}

fn layout(cfg: &ModelConfig) -> Vec<(String, [usize; 2], bool)> {
    let heads = cfg.attention_heads;
    let d = cfg.hidden_dim / heads;
    let mut out = Vec::new();
    for l in 0..cfg.num_gat_layers {
        let fan_in = if l == 0 {
            NODE_FEATURES
        } else {
            cfg.hidden_dim
        };
        out.push((format!("gat{l}.weight"), [fan_in, cfg.hidden_dim], true));
        out.push((format!("gat{l}.att_src"), [heads, d], true));
        out.push((format!("gat{l}.att_dst"), [heads, d], true));
        out.push((format!("gat{l}.bias"), [1, cfg.hidden_dim], false));
    }
    out.push(("head.w1".into(), [cfg.head_input(), cfg.mlp_hidden], true));
    out.push(("head.b1".into(), [1, cfg.mlp_hidden], false));
    out.push(("head.w2".into(), [cfg.out_dim, cfg.mlp_hidden], true));
    out.push(("head.b2".into(), [cfg.out_dim, 1], false));
    out
}

/// Glorot-uniform weights, zero biases, identity normalization.
pub fn init_model(cfg: &ModelConfig, seed: u64) -> Result<ModelParams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = layout(cfg)
        .into_iter()
        .map(|(name, shape, weight)| {
            let len = shape[0] * shape[1];
            let data = if weight {
                // attention vectors and per-slot output rows map d inputs to one score
                let (fan_in, fan_out) = if name.contains("att_") || name == "head.w2" {
                    (shape[1], 1)
                } else {
                    (shape[0], shape[1])
                };
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                (0..len).map(|_| dist.sample(&mut rng)).collect()
            } else {
                vec![0.0; len]
            };
            Tensor { name, shape, data }
        })
        .collect();
    Ok(ModelParams {
        config: cfg.clone(),
        tensors,
        norm: Normalization::identity(cfg.out_dim),
    })
}

/// Graph, masks and raw inputs of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    pub features: FeatureTensors,
    pub masks: LightconeMasks,
    pub hardware_field: Option<Vec<f64>>,
    pub target: Vec<f64>,
    pub n_grid: usize,
    pub nu: f64,
}

pub fn encode_sample(s: &TrainingSample) -> Result<EncodedSample> {
    let dag = circuit_to_dag(&s.circuit);
    let masks = compute_lightcones(&dag);
    let plan = TrotterPlan::new(&s.params, s.t, 1)?;
    let metrics = circuit_metrics(&s.circuit);
    let features = featurize(&dag, &s.params, s.t, &plan, &s.noise, &metrics, &s.noisy)?;
    Ok(EncodedSample {
        features,
        masks,
        hardware_field: s.hardware.clone(),
        target: s.classical.clone(),
        n_grid: s.n_grid(),
        nu: s.params.nu,
    })
}

/// Attention neighbourhoods (predecessors plus self) and pooling segments,
/// derived once per sample.
pub(crate) struct GraphPlan {
    nbrs: Vec<Vec<usize>>,
    segments: Vec<Vec<usize>>,
}

impl GraphPlan {
    pub(crate) fn new(
        f: &FeatureTensors,
        masks: &LightconeMasks,
        cfg: &ModelConfig,
    ) -> Result<Self> {
        let n = f.num_nodes;
        if n == 0 {
            return Err(Error::Model("graph has no nodes".into()));
        }
        let mut nbrs: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for &(u, v) in &f.edges {
            if u >= n || v >= n {
                return Err(Error::Model(format!("edge ({u}, {v}) out of range")));
            }
            nbrs[v].push(u);
        }
        nbrs.iter_mut().for_each(|l| l.sort_unstable());
        let segments = (0..cfg.out_dim)
            .map(|k| {
                if cfg.use_lightcone_masks {
                    let seg: Vec<usize> = masks.slot_union(k).into_iter().collect();
                    if seg.is_empty() {
                        return Err(Error::Model(format!(
                            "output slot {k} has an empty lightcone"
                        )));
                    }
                    Ok(seg)
                } else {
                    Ok((0..n).collect())
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { nbrs, segments })
    }
}

fn check_shapes(params: &ModelParams, f: &FeatureTensors) -> Result<()> {
    let cfg = &params.config;
    if f.node_features.len() != f.num_nodes * NODE_FEATURES {
        return Err(Error::Model(
            "node feature matrix has the wrong width".into(),
        ));
    }
    if f.globals.len() != GLOBAL_FEATURES {
        return Err(Error::Model(format!(
            "expected {GLOBAL_FEATURES} globals, got {}",
            f.globals.len()
        )));
    }
    if f.noisy_field.len() != cfg.out_dim {
        return Err(Error::LengthMismatch {
            expected: cfg.out_dim,
            actual: f.noisy_field.len(),
        });
    }
    let expected = layout(cfg);
    if expected.len() != params.tensors.len()
        || expected
            .iter()
            .zip(&params.tensors)
            .any(|((name, shape, _), t)| {
                *name != t.name || *shape != t.shape || t.data.len() != shape[0] * shape[1]
            })
    {
        return Err(Error::Model(
            "parameter tensors do not match the configuration".into(),
        ));
    }
    Ok(())
}

fn normalized_inputs(params: &ModelParams, f: &FeatureTensors, noisy: &[f64]) -> Mat {
    let n = &params.norm;
    let mut row: Vec<f64> = f
        .globals
        .iter()
        .zip(&n.globals_shift)
        .zip(&n.globals_scale)
        .map(|((x, s), c)| (x - s) / c)
        .collect();
    row.extend(
        noisy
            .iter()
            .zip(&n.field_shift)
            .zip(&n.field_scale)
            .map(|((x, s), c)| (f.bounded(*x) - s) / c),
    );
    Mat::from_vec(1, row.len(), row)
}

pub(crate) struct Built {
    pub param_vars: Vec<Var>,
    pub output: Var,
    pub gat_vars: Vec<Var>,
}

/// Records the forward pass on `tape`. `noisy` replaces the feature
/// tensor's noisy field (used for hardware mixing).
pub(crate) fn build<'a>(
    tape: &mut Tape<'a>,
    params: &ModelParams,
    f: &FeatureTensors,
    noisy: &[f64],
    plan: &'a GraphPlan,
) -> Built {
    let cfg = &params.config;
    let heads = cfg.attention_heads;
    let param_vars: Vec<Var> = params.tensors.iter().map(|t| tape.leaf(t.mat())).collect();
    let mut x = tape.leaf(Mat::from_vec(
        f.num_nodes,
        NODE_FEATURES,
        f.node_features.clone(),
    ));
    let mut gat_vars = Vec::with_capacity(cfg.num_gat_layers);
    for l in 0..cfg.num_gat_layers {
        let [w, a_src, a_dst, b] = [0, 1, 2, 3].map(|k| param_vars[4 * l + k]);
        let h = tape.matmul(x, w);
        let s = tape.head_dot(h, a_src, heads);
        let d = tape.head_dot(h, a_dst, heads);
        let agg = tape.gat(h, s, d, heads, LEAKY_SLOPE, &plan.nbrs);
        gat_vars.push(agg);
        let y = tape.add_row(agg, b);
        x = tape.elu(y);
    }
    let base = 4 * cfg.num_gat_layers;
    let [w1, b1, w2, b2] = [0, 1, 2, 3].map(|k| param_vars[base + k]);
    let pooled = tape.segment_mean(x, &plan.segments);
    let side = tape.leaf(normalized_inputs(params, f, noisy));
    let z = tape.concat_broadcast(pooled, side);
    let hid = tape.matmul(z, w1);
    let hid = tape.add_row(hid, b1);
    let hid = tape.relu(hid);
    let raw = tape.row_dot(hid, w2);
    let raw = tape.add(raw, b2);
    let output = tape.affine(raw, &params.norm.out_scale, &params.norm.out_shift);
    Built {
        param_vars,
        output,
        gat_vars,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub field: Vec<f64>,
    /// Attention of every GAT layer.
    pub attention: Vec<Attention>,
    /// Neighbour lists the attention rows refer to.
    pub neighbours: Vec<Vec<usize>>,
}

/// Corrected velocity field for one graph.
pub fn forward(
    params: &ModelParams,
    f: &FeatureTensors,
    masks: &LightconeMasks,
) -> Result<ForwardOutput> {
    check_shapes(params, f)?;
    let plan = GraphPlan::new(f, masks, &params.config)?;
    let mut tape = Tape::new();
    let built = build(&mut tape, params, f, &f.noisy_field, &plan);
    Ok(ForwardOutput {
        field: tape.value(built.output).data.clone(),
        attention: built
            .gat_vars
            .iter()
            .map(|&v| tape.attention(v).expect("gat node"))
            .collect(),
        neighbours: plan.nbrs.clone(),
    })
}

pub fn loss_mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            expected: target.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64)
}

/// Gradients aligned with `ModelParams::tensors`.
pub type ParamGrads = Vec<Vec<f64>>;

pub(crate) fn loss_and_grads_planned(
    params: &ModelParams,
    f: &FeatureTensors,
    noisy: &[f64],
    plan: &GraphPlan,
    target: &[f64],
) -> (f64, ParamGrads) {
    let mut tape = Tape::new();
    let built = build(&mut tape, params, f, noisy, plan);
    let loss = tape.mse(built.output, target);
    let grads = tape.backward(loss);
    let g = built
        .param_vars
        .iter()
        .zip(&params.tensors)
        .map(|(&v, t)| {
            grads
                .get(v)
                .map_or_else(|| vec![0.0; t.data.len()], |m| m.data.clone())
        })
        .collect();
    (tape.value(loss).data[0], g)
}

/// Loss and exact gradients of `loss_mse(forward(..), target)`.
pub fn backward(
    params: &ModelParams,
    f: &FeatureTensors,
    masks: &LightconeMasks,
    target: &[f64],
) -> Result<(f64, ParamGrads)> {
    check_shapes(params, f)?;
    if target.len() != params.config.out_dim {
        return Err(Error::LengthMismatch {
            expected: params.config.out_dim,
            actual: target.len(),
        });
    }
    let plan = GraphPlan::new(f, masks, &params.config)?;
    Ok(loss_and_grads_planned(
        params,
        f,
        &f.noisy_field,
        &plan,
        target,
    ))
}
