//! Noiseless statevector versus noisy density-matrix execution of the same
//! circuit, then shot sampling and velocity reconstruction.

use qburgers::circuit::build_trotter_circuit;
use qburgers::classical::{classical_reference, initial_state};
use qburgers::dataset::ExperimentParams;
use qburgers::krylov::KrylovConfig;
use qburgers::qagt::mae;
use qburgers::qsim::{self, NoiseModel};

fn main() -> qburgers::Result<()> {
    let params = ExperimentParams::new(0.1, 1e-3, 8, 1.0);
    let t = 0.005;
    let (grid, _, phi0) = initial_state(&params)?;
    let circuit = build_trotter_circuit(&params, t, 1, &phi0)?;
    let reference = &classical_reference(&params, &[t], &KrylovConfig::default())?[0].velocity;

    let psi = qsim::simulate_statevector(&circuit)?;
    let ideal: Vec<f64> = psi.iter().map(|a| a.norm_sqr()).collect();

    for (label, noise) in [
        ("noiseless", NoiseModel::noiseless()),
        ("default", NoiseModel::default()),
        (
            "heavy",
            NoiseModel {
                p2: 0.05,
                ..NoiseModel::default()
            },
        ),
    ] {
        let rho = qsim::simulate_noisy(&circuit, &noise)?;
        let probs = qsim::outcome_probabilities(&rho, &noise);
        let counts = qsim::sample_counts(&rho, 8192, &noise, 11)?;
        let u = qsim::quantum_velocity(&counts, &params, &grid)?;
        println!(
            "{label:>9}: TV to ideal {:.4}, min eig {:.2e}, velocity MAE {:.4}",
            qsim::total_variation(&probs, &ideal),
            rho.min_eigenvalue(),
            mae(&u.values, &reference.values)?
        );
    }
    Ok(())
}
