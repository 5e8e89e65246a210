use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    encode_sample, init_model, loss_and_grads_planned, EncodedSample, GraphPlan, ModelConfig,
    ModelParams, Normalization, ParamGrads,
};
use crate::dataset::TrainingSample;
use crate::error::{Error, Result};
use crate::qsim::derive_seed;

const MIN_SAMPLES: usize = 10;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LrSchedule {
    Constant,
    /// Multiply the rate by `factor` for every epoch after `epoch`.
    Step {
        epoch: usize,
        factor: f64,
    },
}

impl LrSchedule {
    pub fn step_default() -> Self {
        LrSchedule::Step {
            epoch: 70,
            factor: 0.1,
        }
    }

    fn rate(&self, base: f64, epoch: usize) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::Step { epoch: at, factor } if epoch > at => base * factor,
            LrSchedule::Step { .. } => base,
        }
    }
}

/// How the validation set is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SplitStrategy {
    /// Individual snapshots, drawn in the same proportion from every
    /// parameter combination.
    #[default]
    Sample,
    /// Whole parameter combinations, so no validation combination is seen
    /// during training.
    Combo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub batch_size: usize,
    pub val_fraction: f64,
    pub split: SplitStrategy,
    pub seed: u64,
    /// Fraction of training inputs whose noisy field is swapped for the
    /// hardware field when one exists.
    pub hardware_mix_ratio: f64,
    /// Decoupled weight decay applied to weight matrices (not biases).
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 1e-3,
            lr_schedule: LrSchedule::Constant,
            batch_size: 16,
            val_fraction: 0.2,
            split: SplitStrategy::Sample,
            seed: 0,
            hardware_mix_ratio: 0.0,
            weight_decay: 3.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.hardware_mix_ratio) {
            return Err(Error::InvalidArgument(format!(
                "hardware_mix_ratio must lie in [0, 1], got {}",
                self.hardware_mix_ratio
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument(
                "weight decay must be nonnegative".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_mae: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
    pub train_keys: Vec<String>,
    pub val_keys: Vec<String>,
}

pub fn history_csv(history: &[EpochStats]) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,val_mae,lr\n");
    for h in history {
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{:e}",
            h.epoch, h.train_loss, h.val_loss, h.val_mae, h.lr
        );
    }
    s
}

fn mean_std(rows: &[&[f64]], width: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; width];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(*r) {
            *m += x / n;
        }
    }
    let mut std = vec![0.0; width];
    for r in rows {
        for ((s, x), m) in std.iter_mut().zip(*r).zip(&mean) {
            *s += (x - m) * (x - m) / n;
        }
    }
    let std = std
        .into_iter()
        .map(|v| if v.sqrt() > 1e-12 { v.sqrt() } else { 1.0 })
        .collect();
    (mean, std)
}

fn fit_normalization(train: &[&EncodedSample], out_dim: usize) -> Normalization {
    let globals: Vec<&[f64]> = train
        .iter()
        .map(|s| s.features.globals.as_slice())
        .collect();
    let clamped: Vec<Vec<f64>> = train
        .iter()
        .map(|s| {
            s.features
                .noisy_field
                .iter()
                .map(|&x| s.features.bounded(x))
                .collect()
        })
        .collect();
    let fields: Vec<&[f64]> = clamped.iter().map(Vec::as_slice).collect();
    let targets: Vec<&[f64]> = train.iter().map(|s| s.target.as_slice()).collect();
    let (globals_shift, globals_scale) = mean_std(&globals, globals[0].len());
    let (field_shift, field_scale) = mean_std(&fields, out_dim);
    let (out_shift, out_scale) = mean_std(&targets, out_dim);
    Normalization {
        globals_shift,
        globals_scale,
        field_shift,
        field_scale,
        out_shift,
        out_scale,
    }
}

fn split(
    samples: &[TrainingSample],
    frac: f64,
    strategy: SplitStrategy,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut combos: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        combos.entry(s.params.tag()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
    let (mut train, mut val) = (Vec::new(), Vec::new());
    if strategy == SplitStrategy::Combo && combos.len() >= 2 {
        let mut groups: Vec<Vec<usize>> = combos.into_values().collect();
        groups.shuffle(&mut rng);
        let n_val = ((groups.len() as f64 * frac).round() as usize).clamp(1, groups.len() - 1);
        val.extend(groups[..n_val].iter().flatten());
        train.extend(groups[n_val..].iter().flatten());
    } else {
        for mut members in combos.into_values() {
            members.shuffle(&mut rng);
            let k = ((members.len() as f64 * frac).round() as usize).min(members.len());
            val.extend_from_slice(&members[..k]);
            train.extend_from_slice(&members[k..]);
        }
        if val.is_empty() {
            val.push(train.remove(rng.random_range(0..train.len())));
        } else if train.is_empty() {
            train.push(val.remove(rng.random_range(0..val.len())));
        }
    }
    val.sort_unstable();
    train.sort_unstable();
    (train, val)
}

struct Adam {
    m: ParamGrads,
    v: ParamGrads,
    t: i32,
}

impl Adam {
    fn new(params: &ModelParams) -> Self {
        let zeros: ParamGrads = params
            .tensors
            .iter()
            .map(|t| vec![0.0; t.data.len()])
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &ParamGrads, lr: f64, decay: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (((t, g), m), v) in params
            .tensors
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let is_bias = [".bias", ".b1", ".b2"].iter().any(|b| t.name.ends_with(b));
            let shrink = if is_bias { 1.0 } else { 1.0 - lr * decay };
            for i in 0..g.len() {
                t.data[i] *= shrink;
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                t.data[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

fn mae_of(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / truth.len() as f64
}

fn validation(
    params: &ModelParams,
    prepared: &[(EncodedSample, GraphPlan)],
    idx: &[usize],
) -> (f64, f64) {
    let per: Vec<(f64, f64)> = idx
        .par_iter()
        .map(|&i| {
            let (s, plan) = &prepared[i];
            let mut tape = super::tape::Tape::new();
            let built = super::build(
                &mut tape,
                params,
                &s.features,
                &s.features.noisy_field,
                plan,
            );
            let pred = &tape.value(built.output).data;
            let mse = pred
                .iter()
                .zip(&s.target)
                .map(|(p, t)| (p - t) * (p - t))
                .sum::<f64>()
                / s.target.len() as f64;
            (mse, mae_of(pred, &s.target))
        })
        .collect();
    let n = per.len() as f64;
    (
        per.iter().map(|p| p.0).sum::<f64>() / n,
        per.iter().map(|p| p.1).sum::<f64>() / n,
    )
}

/// Trains a fresh model of configuration `model_cfg` on `samples`.
pub fn train(
    samples: &[TrainingSample],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model_cfg.validate()?;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "training needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if let Some(bad) = samples.iter().find(|s| s.n_grid() != model_cfg.out_dim) {
        return Err(Error::LengthMismatch {
            expected: model_cfg.out_dim,
            actual: bad.n_grid(),
        });
    }
    let prepared: Vec<(EncodedSample, GraphPlan)> = samples
        .par_iter()
        .map(|s| {
            let e = encode_sample(s)?;
            let plan = GraphPlan::new(&e.features, &e.masks, model_cfg)?;
            Ok((e, plan))
        })
        .collect::<Result<_>>()?;

    let (train_idx, val_idx) = split(samples, cfg.val_fraction, cfg.split, cfg.seed);
    let mut params = init_model(model_cfg, derive_seed(cfg.seed, &[1]))?;
    let train_refs: Vec<&EncodedSample> = train_idx.iter().map(|&i| &prepared[i].0).collect();
    params.norm = fit_normalization(&train_refs, model_cfg.out_dim);

    let mut adam = Adam::new(&params);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order = train_idx.clone();
    for epoch in 1..=cfg.epochs {
        let lr = cfg.lr_schedule.rate(cfg.learning_rate, epoch);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[2, epoch as u64]));
        order.shuffle(&mut rng);
        let use_hw: Vec<bool> = order
            .iter()
            .map(|&i| {
                prepared[i].0.hardware_field.is_some()
                    && cfg.hardware_mix_ratio > 0.0
                    && rng.random::<f64>() < cfg.hardware_mix_ratio
            })
            .collect();

        let mut loss_sum = 0.0;
        for (batch, hw) in order
            .chunks(cfg.batch_size)
            .zip(use_hw.chunks(cfg.batch_size))
        {
            let results: Vec<(f64, ParamGrads)> = batch
                .par_iter()
                .zip(hw)
                .map(|(&i, &hw)| {
                    let (s, plan) = &prepared[i];
                    let noisy = match (&s.hardware_field, hw) {
                        (Some(h), true) => h.as_slice(),
                        _ => s.features.noisy_field.as_slice(),
                    };
                    loss_and_grads_planned(&params, &s.features, noisy, plan, &s.target)
                })
                .collect();
            let inv = 1.0 / results.len() as f64;
            let mut total: ParamGrads = params
                .tensors
                .iter()
                .map(|t| vec![0.0; t.data.len()])
                .collect();
            for (loss, g) in &results {
                loss_sum += loss;
                for (acc, gi) in total.iter_mut().zip(g) {
                    for (a, x) in acc.iter_mut().zip(gi) {
                        *a += x * inv;
                    }
                }
            }
            adam.step(&mut params, &total, lr, cfg.weight_decay);
        }
        if !params.is_finite() {
            return Err(Error::Model(format!(
                "parameters diverged at epoch {epoch}"
            )));
        }
        let (val_loss, val_mae) = validation(&params, &prepared, &val_idx);
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            val_loss,
            val_mae,
            lr,
        });
    }
    let keys = |idx: &[usize]| idx.iter().map(|&i| samples[i].key.clone()).collect();
    Ok(TrainOutcome {
        params,
        history,
        train_keys: keys(&train_idx),
        val_keys: keys(&val_idx),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_schedule() {
        let s = LrSchedule::step_default();
        assert_eq!(s.rate(1e-3, 70), 1e-3);
        assert!((s.rate(1e-3, 71) - 1e-4).abs() < 1e-18);
        assert_eq!(LrSchedule::Constant.rate(1e-3, 99), 1e-3);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig {
            val_fraction: 1.0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            hardware_mix_ratio: 1.5,
            ..TrainConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn normalization_guards_constant_columns() {
        let (m, s) = mean_std(&[&[1.0, 2.0], &[1.0, 4.0]], 2);
        assert_eq!(m, vec![1.0, 3.0]);
        assert_eq!(s, vec![1.0, 1.0]);
    }

    #[test]
    fn csv_header() {
        let h = [EpochStats {
            epoch: 1,
            train_loss: 0.5,
            val_loss: 0.25,
            val_mae: 0.1,
            lr: 1e-3,
        }];
        let csv = history_csv(&h);
        assert!(csv.starts_with("epoch,train_loss,val_loss,val_mae,lr\n1,5e-1,2.5e-1,1e-1,1e-3"));
    }
}
