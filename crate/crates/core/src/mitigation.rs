//! Zero-noise extrapolation baseline: scaled circuits, first-order
//! Richardson combination of scales 1 and 3, and clipping.

use crate::circuit::{self, QuantumCircuit};
use crate::dataset::ExperimentParams;
use crate::error::{Error, Result};
use crate::pde::{self, ColeHopfField, VelocityField};
use crate::qsim::{self, NoiseModel, ShotResult};

#[derive(Debug, Clone, PartialEq)]
pub struct ZneConfig {
    pub scales: Vec<usize>,
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for ZneConfig {
    fn default() -> Self {
        Self {
            scales: vec![1, 3],
            u_min: -1.0,
            u_max: 2.0,
        }
    }
}

impl ZneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales.len() < 2 || self.scales[0] != 1 {
            return Err(Error::InvalidArgument(format!(
                "ZNE needs at least two scales starting at 1, got {:?}",
                self.scales
            )));
        }
        if self.scales.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "ZNE scales must be strictly increasing, got {:?}",
                self.scales
            )));
        }
        if !(self.u_min <= self.u_max) {
            return Err(Error::InvalidArgument(format!(
                "clip bounds inverted: [{}, {}]",
                self.u_min, self.u_max
            )));
        }
        Ok(())
    }
}

/// `(3/2) u1 - (1/2) u3` pointwise; end points and boundary values are
/// taken from `u1`.
pub fn zne_combine(u1: &VelocityField, u3: &VelocityField) -> Result<VelocityField> {
    if u1.len() != u3.len() {
        return Err(Error::LengthMismatch {
            expected: u1.len(),
            actual: u3.len(),
        });
    }
    let mut values: Vec<f64> = u1
        .values
        .iter()
        .zip(&u3.values)
        .map(|(a, b)| 1.5 * a - 0.5 * b)
        .collect();
    if let (Some(first), Some(last)) = (u1.values.first(), u1.values.last()) {
        values[0] = *first;
        let n = values.len();
        values[n - 1] = *last;
    }
    Ok(VelocityField {
        values,
        u_left: u1.u_left,
        u_right: u1.u_right,
    })
}

/// Pointwise clamp to `[u_min, u_max]`. Boundary values are clamped with
/// the field so the end points keep matching them.
pub fn clip_field(u: &VelocityField, u_min: f64, u_max: f64) -> VelocityField {
    VelocityField {
        values: u.values.iter().map(|v| v.clamp(u_min, u_max)).collect(),
        u_left: u.u_left.clamp(u_min, u_max),
        u_right: u.u_right.clamp(u_min, u_max),
    }
}

/// Anything that can produce a velocity field at a given noise scale.
pub trait ScaledExecutor {
    type Artifact;

    fn execute(&mut self, scale: usize) -> Result<(VelocityField, Self::Artifact)>;
}

/// Artifacts of one noise scale of a simulated ZNE run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleRun {
    pub scale: usize,
    pub circuit: QuantumCircuit,
    pub result: ShotResult,
    pub velocity: VelocityField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZneRun<A> {
    pub u_zne: VelocityField,
    pub per_scale: Vec<(usize, VelocityField, A)>,
}

/// Executes every configured scale, combines the first two and clips.
pub fn extrapolate<E: ScaledExecutor>(
    executor: &mut E,
    cfg: &ZneConfig,
) -> Result<ZneRun<E::Artifact>> {
    cfg.validate()?;
    let mut per_scale = Vec::with_capacity(cfg.scales.len());
    for &s in &cfg.scales {
        let (u, artifact) = executor.execute(s)?;
        per_scale.push((s, u, artifact));
    }
    let combined = zne_combine(&per_scale[0].1, &per_scale[1].1)?;
    Ok(ZneRun {
        u_zne: clip_field(&combined, cfg.u_min, cfg.u_max),
        per_scale,
    })
}

/// Noisy density-matrix execution of the scaled Trotter circuit.
pub struct SimulatedExecutor<'a> {
    pub params: &'a ExperimentParams,
    pub t: f64,
    pub phi0: &'a ColeHopfField,
    pub noise: &'a NoiseModel,
    pub shots: u64,
    pub seed: u64,
}

impl ScaledExecutor for SimulatedExecutor<'_> {
    type Artifact = (QuantumCircuit, ShotResult);

    fn execute(&mut self, scale: usize) -> Result<(VelocityField, Self::Artifact)> {
        let grid = pde::build_grid(self.params.n_grid)?;
        let circuit = circuit::build_trotter_circuit(self.params, self.t, scale, self.phi0)?;
        let rho = qsim::simulate_noisy(&circuit, self.noise)?;
        let seed = scale_seed(self.seed, scale);
        let result = qsim::sample_counts(&rho, self.shots, self.noise, seed)?;
        let u = qsim::quantum_velocity(&result, self.params, &grid)?;
        Ok((u, (circuit, result)))
    }
}

/// Seed used for noise scale `s` of a snapshot with seed `seed`.
pub fn scale_seed(seed: u64, scale: usize) -> u64 {
    qsim::derive_seed(seed, &[scale as u64])
}

pub fn run_zne(
    params: &ExperimentParams,
    t: f64,
    phi0: &ColeHopfField,
    noise: &NoiseModel,
    shots: u64,
    seed: u64,
    cfg: &ZneConfig,
) -> Result<(VelocityField, Vec<ScaleRun>)> {
    let mut exec = SimulatedExecutor {
        params,
        t,
        phi0,
        noise,
        shots,
        seed,
    };
    let run = extrapolate(&mut exec, cfg)?;
    let per_scale = run
        .per_scale
        .into_iter()
        .map(|(scale, velocity, (circuit, result))| ScaleRun {
            scale,
            circuit,
            result,
            velocity,
        })
        .collect();
    Ok((run.u_zne, per_scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::initial_state;
    use proptest::prelude::*;

    fn vf(values: Vec<f64>) -> VelocityField {
        VelocityField {
            u_left: values[0],
            u_right: *values.last().unwrap(),
            values,
        }
    }

    #[test]
    fn combine_fixed_point_and_example() {
        let u = vf(vec![1.0, 0.3, -0.2, 0.0]);
        let fixed = zne_combine(&u, &u).unwrap();
        for (a, b) in fixed.values.iter().zip(&u.values) {
            assert!((a - b).abs() < 1e-15);
        }
        let r = zne_combine(&vf(vec![1.0]), &vf(vec![0.6])).unwrap();
        assert!((r.values[0] - 1.0).abs() < 1e-15);
        let r = zne_combine(&vf(vec![0.0, 1.0, 0.0]), &vf(vec![0.0, 0.6, 0.0])).unwrap();
        assert!((r.values[1] - 1.2).abs() < 1e-15);
        assert!(zne_combine(&vf(vec![0.0, 1.0]), &vf(vec![0.0])).is_err());
    }

    #[test]
    fn clip_examples() {
        let u = vf(vec![2.5, 0.5, -3.0]);
        let c = clip_field(&u, -1.0, 2.0);
        assert_eq!(c.values, vec![2.0, 0.5, -1.0]);
        assert_eq!(c.u_left, 2.0);
        let inside = vf(vec![0.0, 1.0, 0.0]);
        assert_eq!(clip_field(&inside, -1.0, 2.0), inside);
    }

    #[test]
    fn config_validation() {
        assert!(ZneConfig::default().validate().is_ok());
        let bad = ZneConfig {
            scales: vec![3, 1],
            ..ZneConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ZneConfig {
            scales: vec![2, 3],
            ..ZneConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn noiseless_pipeline_completes_and_reruns_identically() {
        let p = ExperimentParams::new(0.1, 1e-3, 8, 1.0);
        let phi0 = initial_state(&p).unwrap().2;
        let cfg = ZneConfig::default();
        let noise = NoiseModel::noiseless();
        let a = run_zne(&p, 0.005, &phi0, &noise, 4096, 11, &cfg).unwrap();
        let b = run_zne(&p, 0.005, &phi0, &noise, 4096, 11, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.len(), 2);
        assert_ne!(a.1[0].result.seed, a.1[1].result.seed);
        assert!(a.0.values.iter().all(|v| (-1.0..=2.0).contains(v)));
    }

    struct Linear {
        ideal: Vec<f64>,
        slope: Vec<f64>,
    }

    impl ScaledExecutor for Linear {
        type Artifact = ();
        fn execute(&mut self, scale: usize) -> Result<(VelocityField, ())> {
            let values = self
                .ideal
                .iter()
                .zip(&self.slope)
                .map(|(i, c)| i + c * scale as f64)
                .collect();
            Ok((vf(values), ()))
        }
    }

    proptest! {
        #[test]
        fn linearity(a in -3.0f64..3.0, u in proptest::collection::vec(-2.0f64..2.0, 6), v in proptest::collection::vec(-2.0f64..2.0, 6)) {
            let lhs = zne_combine(&vf(u.iter().map(|x| a * x).collect()), &vf(v.iter().map(|x| a * x).collect())).unwrap();
            let rhs = zne_combine(&vf(u.clone()), &vf(v.clone())).unwrap();
            for (l, r) in lhs.values.iter().zip(&rhs.values) {
                prop_assert!((l - a * r).abs() <= 1e-12);
            }
        }

        #[test]
        fn richardson_exact_on_linear_noise(
            interior in proptest::collection::vec(-0.9f64..1.9, 5),
            slope in proptest::collection::vec(-0.3f64..0.3, 5),
        ) {
            let mut ideal = vec![1.0];
            ideal.extend(&interior);
            ideal.push(0.0);
            let mut slopes = vec![0.0];
            slopes.extend(&slope);
            slopes.push(0.0);
            let mut exec = Linear { ideal: ideal.clone(), slope: slopes };
            let run = extrapolate(&mut exec, &ZneConfig { u_min: -10.0, u_max: 10.0, ..ZneConfig::default() }).unwrap();
            for (z, i) in run.u_zne.values.iter().zip(&ideal) {
                prop_assert!((z - i).abs() <= 1e-12);
            }
        }

        #[test]
        fn clip_idempotent_and_bounded(u in proptest::collection::vec(-5.0f64..5.0, 7)) {
            let once = clip_field(&vf(u), -1.0, 2.0);
            prop_assert!(once.values.iter().all(|v| (-1.0..=2.0).contains(v)));
            prop_assert_eq!(clip_field(&once, -1.0, 2.0), once);
        }
    }
}
