//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion failed.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng;

use qburgers::circuit::TrotterPlan;
use qburgers::circuit::{build_trotter_circuit, circuit_metrics};
use qburgers::circuit_graph::{circuit_to_dag, compute_lightcones, featurize};
use qburgers::classical::{self, build_laplacian, krylov_expm_apply};
use qburgers::dataset::{
    self, load_dataset, run_sweep, validate_schema, DatasetFilter, RunSettings, MANIFEST_NAME,
    NU_VALUES, N_VALUES, TIME_SETS, UL_VALUES,
};
use qburgers::krylov::KrylovConfig;
use qburgers::mitigation::zne_combine;
use qburgers::pde::VelocityField;
use qburgers::qagt::{self, ModelConfig, TrainConfig};
use qburgers::qsim::{self, NoiseModel};

const TIMESTAMP: &str = "2025-01-01T00:00:00Z";

struct Verdict {
    id: u32,
    pass: bool,
    detail: String,
}

fn verdict(id: u32, pass: bool, detail: String) -> Verdict {
    println!(
        "criterion {id:>2}: {} | {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    Verdict { id, pass, detail }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn circuit_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = common::rng(101);
    let mut worst: f64 = 1.0;
    for _ in 0..30 {
        let (_, _, c) = common::random_sweep_circuit(&mut rng, 64);
        assert!(c.n_qubits() <= 6);
        let sim = qsim::simulate_statevector(&c).unwrap();
        let oracle = common::dense_unitary_state(&c);
        worst = worst.min(common::fidelity(&sim, &oracle));
    }
    let el = start.elapsed();
    verdict(
        1,
        worst >= 1.0 - 1e-10 && el < Duration::from_secs(10),
        format!(
            "30 circuits, min fidelity 1-{:.2e}, {:.2}s",
            1.0 - worst,
            secs(el)
        ),
    )
}

fn krylov_oracle() -> Verdict {
    let start = Instant::now();
    let mut times: Vec<f64> = TIME_SETS.iter().flat_map(|s| s.iter().copied()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let cfg = KrylovConfig::default();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for &n in &N_VALUES {
        for &nu in &NU_VALUES {
            for &t in &times {
                let prop = common::dense_heat_propagator(n, nu, t);
                for &ul in &UL_VALUES {
                    let p = dataset::ExperimentParams::new(nu, 1e-3, n, ul);
                    let (grid, _, phi0) = classical::initial_state(&p).unwrap();
                    let op = build_laplacian(&grid);
                    let got = krylov_expm_apply(&op, nu, &phi0, t, &cfg).unwrap();
                    let v = nalgebra::DVector::from_column_slice(phi0.as_slice());
                    let want = &prop * v;
                    for (a, b) in got.iter().zip(want.iter()) {
                        worst = worst.max((a - b).abs());
                    }
                    cases += 1;
                }
            }
        }
    }
    let el = start.elapsed();
    verdict(
        2,
        worst <= 1e-8 && el < Duration::from_secs(30),
        format!(
            "{cases} (N, nu, t, u_L) cases, max |diff| {worst:.2e}, {:.2}s",
            secs(el)
        ),
    )
}

fn field(values: Vec<f64>) -> VelocityField {
    VelocityField {
        values,
        u_left: 1.0,
        u_right: 0.0,
    }
}

fn zne_algebra() -> Verdict {
    let cases = 128;
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    let vecs = (3usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
            -2.0f64..2.0,
            -2.0f64..2.0,
        )
    });
    let outcome = runner.run(&vecs, |(u1, u3, v1, v3, a, b)| {
        let n = u1.len();
        let fixed = zne_combine(&field(u1.clone()), &field(u1.clone())).unwrap();
        for (x, y) in fixed.values.iter().zip(&u1) {
            prop_assert!((x - y).abs() <= 1e-12);
        }

        let mix = |x: &[f64], y: &[f64]| {
            x.iter()
                .zip(y)
                .map(|(p, q)| a * p + b * q)
                .collect::<Vec<_>>()
        };
        let lhs = zne_combine(&field(mix(&u1, &v1)), &field(mix(&u3, &v3))).unwrap();
        let cu = zne_combine(&field(u1.clone()), &field(u3.clone())).unwrap();
        let cv = zne_combine(&field(v1.clone()), &field(v3.clone())).unwrap();
        for k in 0..n {
            prop_assert!((lhs.values[k] - (a * cu.values[k] + b * cv.values[k])).abs() <= 1e-12);
        }

        // u(s) = c + d s sampled at s = 1 and s = 3 extrapolates to c.
        let (c, d) = (&u1, &v1);
        let at = |s: f64| {
            c.iter()
                .zip(d)
                .map(|(ci, di)| ci + di * s)
                .collect::<Vec<_>>()
        };
        let r = zne_combine(&field(at(1.0)), &field(at(3.0))).unwrap();
        for k in 1..n - 1 {
            prop_assert!((r.values[k] - c[k]).abs() <= 1e-12);
        }
        Ok(())
    });
    verdict(
        3,
        outcome.is_ok(),
        match outcome {
            Ok(()) => format!(
                "{cases} random cases: fixed point, linearity, Richardson exactness at 1e-12"
            ),
            Err(e) => format!("{e}"),
        },
    )
}

fn lightcones() -> Verdict {
    let mut rng = common::rng(404);
    let mut mismatches = 0;
    for i in 0..50 {
        let n = rng.random_range(2..=8);
        let gates = rng.random_range(0..=20);
        let c = common::random_rxx_circuit(&mut rng, n, gates, i % 5 != 0);
        if common::library_lightcones(&c) != common::brute_force_lightcones(&c) {
            mismatches += 1;
        }
    }
    verdict(
        4,
        mismatches == 0,
        format!("50 random circuits, {mismatches} mismatches"),
    )
}

fn gradients() -> Verdict {
    let start = Instant::now();
    let p = dataset::ExperimentParams::new(0.1, 1e-3, 8, 1.0);
    let t = 0.004;
    let (grid, _, phi0) = classical::initial_state(&p).unwrap();
    let c = build_trotter_circuit(&p, t, 1, &phi0).unwrap();
    let noise = NoiseModel::default();
    let rho = qsim::simulate_noisy(&c, &noise).unwrap();
    let counts = qsim::sample_counts(&rho, 4096, &noise, 3).unwrap();
    let noisy = qsim::quantum_velocity(&counts, &p, &grid).unwrap();
    let target = classical::classical_reference(&p, &[t], &KrylovConfig::default()).unwrap()[0]
        .velocity
        .values
        .clone();
    let dag = circuit_to_dag(&c);
    let masks = compute_lightcones(&dag);
    let plan = TrotterPlan::new(&p, t, 1).unwrap();
    let f = featurize(
        &dag,
        &p,
        t,
        &plan,
        &noise,
        &circuit_metrics(&c),
        &noisy.values,
    )
    .unwrap();
    let cfg = ModelConfig {
        num_gat_layers: 1,
        attention_heads: 2,
        hidden_dim: 8,
        mlp_hidden: 16,
        ..ModelConfig::new(8)
    };
    let params = qagt::init_model(&cfg, 17).unwrap();
    let (_, grads) = qagt::backward(&params, &f, &masks, &target).unwrap();

    let h = 1e-5;
    let mut rng = common::rng(505);
    let mut worst: f64 = 0.0;
    let coords = 24;
    for _ in 0..coords {
        let ti = rng.random_range(0..params.tensors.len());
        let e = rng.random_range(0..params.tensors[ti].data.len());
        let loss_at = |delta: f64| {
            let mut q = params.clone();
            q.tensors[ti].data[e] += delta;
            qagt::backward(&q, &f, &masks, &target).unwrap().0
        };
        let fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
        let g = grads[ti][e];
        worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-6));
    }
    let el = start.elapsed();
    verdict(
        5,
        worst <= 1e-4 && el < Duration::from_secs(30),
        format!(
            "{coords} coordinates, max rel err {worst:.2e} (denominator floor 1e-6), {:.2}s",
            secs(el)
        ),
    )
}

fn settings(seed: u64) -> RunSettings {
    RunSettings {
        base_seed: seed,
        timestamp: Some(TIMESTAMP.into()),
        ..RunSettings::default()
    }
}

fn schema_violations(dir: &Path) -> usize {
    let mut bad = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "json") && !p.ends_with(MANIFEST_NAME) {
            bad += validate_schema(&p).unwrap().len();
        }
    }
    bad
}

fn reduced_sweep(out: &Path) -> (Verdict, bool) {
    let start = Instant::now();
    let combos = dataset::sweep(&[0.05, 0.10], &[1e-3], &[8, 16], &[1.0, 2.0]);
    let a = out.join("a");
    let b = out.join("b");
    let sa = run_sweep(&combos, &settings(42), &a, 1).unwrap();
    let sb = run_sweep(&combos, &settings(42), &b, 4).unwrap();
    let el = start.elapsed();
    let identical = common::snapshot_tree(&a) == common::snapshot_tree(&b);
    let bad = schema_violations(&a);
    let shape = sa.combos == 8 && sa.records == 8 * 14 && sb.records == sa.records;
    (
        verdict(
            6,
            identical && bad == 0 && shape && el < Duration::from_secs(60),
            format!(
                "{} combos x 14 = {} records, byte-identical {identical}, {bad} schema violations, {:.2}s for both runs",
                sa.combos,
                sa.records,
                secs(el)
            ),
        ),
        identical,
    )
}

fn table_gain() -> Verdict {
    let g = qagt::gain_percent(0.5899, 0.3394);
    verdict(7, (g - 42.5).abs() <= 0.1, format!("gain {g:.3}%"))
}

struct TrainRun {
    outcome: qagt::TrainOutcome,
    samples: Vec<dataset::TrainingSample>,
    history: String,
    checkpoint: Vec<u8>,
    elapsed: Duration,
}

fn train_run(out: &Path) -> TrainRun {
    let start = Instant::now();
    let combos = dataset::sweep(&NU_VALUES, &[1e-3, 2e-3], &[16], &[1.0, 2.0]);
    run_sweep(&combos, &settings(7), out, 1).unwrap();
    let data = load_dataset(
        out,
        &DatasetFilter {
            dims: Some(vec![16]),
            ..DatasetFilter::default()
        },
    )
    .unwrap();
    let outcome = qagt::train(
        &data.samples,
        &ModelConfig::new(16),
        &TrainConfig::default(),
    )
    .unwrap();
    let ckpt = out.join("model.json");
    qagt::save_checkpoint(&outcome.params, &ckpt).unwrap();
    TrainRun {
        history: qagt::history_csv(&outcome.history),
        checkpoint: std::fs::read(&ckpt).unwrap(),
        samples: data.samples,
        outcome,
        elapsed: start.elapsed(),
    }
}

fn mitigation(run: &TrainRun) -> Verdict {
    let held_out: Vec<_> = run
        .samples
        .iter()
        .filter(|s| run.outcome.val_keys.contains(&s.key))
        .cloned()
        .collect();
    let report = qagt::evaluate(&run.outcome.params, &held_out).unwrap();
    let clipped = held_out
        .iter()
        .map(|s| {
            let u: Vec<f64> = s.noisy.iter().map(|v| v.clamp(-1.0, 2.0)).collect();
            qagt::mae(&u, &s.classical).unwrap()
        })
        .sum::<f64>()
        / held_out.len() as f64;
    let corrected = report.mean_corrected();
    let raw = report.mean_noisy();
    verdict(
        8,
        run.samples.len() >= 200
            && corrected <= 0.85 * raw
            && corrected <= 0.85 * clipped
            && run.elapsed < Duration::from_secs(600),
        format!(
            "{} samples ({} held out), corrected MAE {corrected:.4} vs noisy {raw:.3e} (clipped to [-1,2]: {clipped:.4}), {:.1}s",
            run.samples.len(),
            held_out.len(),
            secs(run.elapsed)
        ),
    )
}

fn training_curve(run: &TrainRun) -> Verdict {
    let h = &run.outcome.history;
    let (e1, e10, last) = (h[0], h[9], h[h.len() - 1]);
    let ratio = last.val_loss / last.train_loss;
    verdict(
        9,
        h.len() == 100 && e10.train_loss < e1.train_loss && ratio <= 2.0,
        format!(
            "train loss e1 {:.3e} e10 {:.3e}; epoch {} val/train {:.3e}/{:.3e} = {ratio:.2}",
            e1.train_loss, e10.train_loss, last.epoch, last.val_loss, last.train_loss
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mut verdicts = vec![
        circuit_oracle(),
        krylov_oracle(),
        zne_algebra(),
        lightcones(),
        gradients(),
    ];

    let (v6, sweep_identical) = reduced_sweep(&dir.path().join("reduced"));
    verdicts.push(v6);
    verdicts.push(table_gain());

    let first = train_run(&dir.path().join("train_a"));
    verdicts.push(mitigation(&first));
    verdicts.push(training_curve(&first));

    let second = train_run(&dir.path().join("train_b"));
    let rerun_sweep = common::snapshot_tree(&dir.path().join("reduced/a"))
        == common::snapshot_tree(&{
            let c = dir.path().join("reduced_c");
            let combos = dataset::sweep(&[0.05, 0.10], &[1e-3], &[8, 16], &[1.0, 2.0]);
            run_sweep(&combos, &settings(42), &c, 2).unwrap();
            c
        });
    let data_same = {
        let strip = |root: &Path| {
            let mut t = common::snapshot_tree(root);
            t.remove("model.json");
            t
        };
        strip(&dir.path().join("train_a")) == strip(&dir.path().join("train_b"))
    };
    let history_same = first.history == second.history;
    let ckpt_same = first.checkpoint == second.checkpoint;
    verdicts.push(verdict(
        10,
        sweep_identical && rerun_sweep && data_same && history_same && ckpt_same,
        format!(
            "reduced sweep files {}, training data files {data_same}, history CSV {history_same}, checkpoint {ckpt_same}",
            sweep_identical && rerun_sweep
        ),
    ));

    let failed: Vec<_> = verdicts
        .iter()
        .filter(|v| !v.pass)
        .map(|v| (v.id, v.detail.as_str()))
        .collect();
    println!(
        "acceptance: {}/{} criteria pass",
        verdicts.len() - failed.len(),
        verdicts.len()
    );
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
