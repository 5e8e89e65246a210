use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::{encode_sample, forward, ModelParams};
use crate::dataset::TrainingSample;
use crate::error::{Error, Result};

/// Viscosity at or below which a sample counts as small-viscosity.
pub const SMALL_NU_MAX: f64 = 0.05;
/// Viscosity at or above which a sample counts as large-viscosity.
pub const LARGE_NU_MIN: f64 = 0.10;

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || truth.is_empty() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / truth.len() as f64)
}

/// `100 (baseline - corrected) / baseline`.
pub fn gain_percent(baseline: f64, corrected: f64) -> f64 {
    100.0 * (baseline - corrected) / baseline
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleEval {
    pub key: String,
    pub n_grid: usize,
    pub nu: f64,
    pub mae_noisy: f64,
    pub mae_zne: Option<f64>,
    pub mae_hardware: Option<f64>,
    pub mae_corrected: f64,
    /// Correction applied to the hardware field.
    pub mae_corrected_hw: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    Dim,
    NuRegime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub label: String,
    pub samples: usize,
    pub sim_noisy: f64,
    pub zne: Option<f64>,
    pub hw_raw: Option<f64>,
    pub corrected_sim: f64,
    pub corrected_hw: Option<f64>,
    pub gain_sim: f64,
    pub gain_hw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub samples: Vec<SampleEval>,
}

fn regime(nu: f64) -> &'static str {
    if nu <= SMALL_NU_MAX {
        "small"
    } else if nu >= LARGE_NU_MIN {
        "large"
    } else {
        "intermediate"
    }
}

fn mean_of(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Vec<f64> = xs.flatten().collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn summarize(label: String, rows: &[&SampleEval]) -> GroupSummary {
    let n = rows.len() as f64;
    let sim_noisy = rows.iter().map(|r| r.mae_noisy).sum::<f64>() / n;
    let corrected_sim = rows.iter().map(|r| r.mae_corrected).sum::<f64>() / n;
    let hw_raw = mean_of(rows.iter().map(|r| r.mae_hardware));
    let corrected_hw = mean_of(rows.iter().map(|r| r.mae_corrected_hw));
    GroupSummary {
        label,
        samples: rows.len(),
        sim_noisy,
        zne: mean_of(rows.iter().map(|r| r.mae_zne)),
        hw_raw,
        corrected_sim,
        corrected_hw,
        gain_sim: gain_percent(sim_noisy, corrected_sim),
        gain_hw: hw_raw.zip(corrected_hw).map(|(b, c)| gain_percent(b, c)),
    }
}

impl EvalReport {
    pub fn mean_noisy(&self) -> f64 {
        self.samples.iter().map(|s| s.mae_noisy).sum::<f64>() / self.samples.len() as f64
    }

    pub fn mean_corrected(&self) -> f64 {
        self.samples.iter().map(|s| s.mae_corrected).sum::<f64>() / self.samples.len() as f64
    }

    pub fn groups(&self, by: GroupBy) -> Vec<GroupSummary> {
        let mut map: BTreeMap<(usize, &str), Vec<&SampleEval>> = BTreeMap::new();
        for s in &self.samples {
            let key = match by {
                GroupBy::Dim => (s.n_grid, ""),
                GroupBy::NuRegime => (0, regime(s.nu)),
            };
            map.entry(key).or_default().push(s);
        }
        map.into_iter()
            .map(|((n, r), rows)| {
                let label = match by {
                    GroupBy::Dim => n.to_string(),
                    GroupBy::NuRegime => r.to_string(),
                };
                summarize(label, &rows)
            })
            .collect()
    }

    /// Table with columns `Dim, Samples, Sim Noisy, ZNE, HW Raw,
    /// Corrected(Sim), Corrected(HW), Gains`.
    pub fn to_csv(&self, by: GroupBy) -> String {
        let first = match by {
            GroupBy::Dim => "Dim",
            GroupBy::NuRegime => "Regime",
        };
        let mut s =
            format!("{first},Samples,Sim Noisy,ZNE,HW Raw,Corrected(Sim),Corrected(HW),Gains\n");
        let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        let pct = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:+.1}%"));
        for g in self.groups(by) {
            let _ = writeln!(
                s,
                "{},{},{:.4},{},{},{:.4},{},Sim {} / HW {}",
                g.label,
                g.samples,
                g.sim_noisy,
                opt(g.zne),
                opt(g.hw_raw),
                g.corrected_sim,
                opt(g.corrected_hw),
                pct(Some(g.gain_sim)),
                pct(g.gain_hw)
            );
        }
        s
    }
}

/// Scores the model against the classical reference for every sample.
pub fn evaluate(params: &ModelParams, samples: &[TrainingSample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    let rows = samples
        .par_iter()
        .map(|s| {
            if s.n_grid() != params.config.out_dim {
                return Err(Error::LengthMismatch {
                    expected: params.config.out_dim,
                    actual: s.n_grid(),
                });
            }
            let enc = encode_sample(s)?;
            let corrected = forward(params, &enc.features, &enc.masks)?.field;
            let mae_corrected_hw = match &s.hardware {
                Some(h) => {
                    let mut f = enc.features.clone();
                    f.noisy_field = h.clone();
                    Some(mae(&forward(params, &f, &enc.masks)?.field, &s.classical)?)
                }
                None => None,
            };
            Ok(SampleEval {
                key: s.key.clone(),
                n_grid: s.n_grid(),
                nu: s.params.nu,
                mae_noisy: mae(&s.noisy, &s.classical)?,
                mae_zne: s.zne.as_ref().map(|z| mae(z, &s.classical)).transpose()?,
                mae_hardware: s
                    .hardware
                    .as_ref()
                    .map(|h| mae(h, &s.classical))
                    .transpose()?,
                mae_corrected: mae(&corrected, &s.classical)?,
                mae_corrected_hw,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport { samples: rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_formula() {
        assert!((gain_percent(0.5899, 0.3394) - 42.465).abs() < 0.01);
        assert_eq!(gain_percent(0.4, 0.0), 100.0);
        assert_eq!(mae(&[1.0, 1.0], &[0.0, 2.0]).unwrap(), 1.0);
    }

    fn row(n: usize, nu: f64, noisy: f64, corr: f64) -> SampleEval {
        SampleEval {
            key: format!("{n}-{nu}"),
            n_grid: n,
            nu,
            mae_noisy: noisy,
            mae_zne: None,
            mae_hardware: None,
            mae_corrected: corr,
            mae_corrected_hw: None,
        }
    }

    #[test]
    fn grouping_and_csv() {
        let r = EvalReport {
            samples: vec![
                row(16, 0.01, 0.4, 0.2),
                row(16, 0.2, 0.6, 0.3),
                row(32, 0.1, 1.0, 0.5),
            ],
        };
        let dims = r.groups(GroupBy::Dim);
        assert_eq!(dims.len(), 2);
        assert_eq!(dims[0].samples, 2);
        assert!((dims[0].gain_sim - 50.0).abs() < 1e-12);
        let regimes = r.groups(GroupBy::NuRegime);
        assert_eq!(
            regimes.iter().map(|g| g.label.as_str()).collect::<Vec<_>>(),
            ["large", "small"]
        );
        let csv = r.to_csv(GroupBy::Dim);
        assert!(csv
            .starts_with("Dim,Samples,Sim Noisy,ZNE,HW Raw,Corrected(Sim),Corrected(HW),Gains\n"));
        assert!(csv.contains("16,2,0.5000,n/a,n/a,0.2500,n/a,Sim +50.0% / HW n/a"));
    }
}
