//! Builds the Trotterized `R_XX` circuit for a snapshot, prints its
//! metrics and the head of its text serialization.

use qburgers::circuit::{build_trotter_circuit, circuit_metrics, serialize_circuit, TrotterPlan};
use qburgers::classical::initial_state;
use qburgers::dataset::ExperimentParams;

fn main() -> qburgers::Result<()> {
    let params = ExperimentParams::new(0.1, 2e-3, 16, 1.0);
    let (_, _, phi0) = initial_state(&params)?;
    for (t, scale) in [(0.004, 1), (0.01, 1), (0.01, 3)] {
        let plan = TrotterPlan::new(&params, t, scale)?;
        let c = build_trotter_circuit(&params, t, scale, &phi0)?;
        let m = circuit_metrics(&c);
        println!(
            "t={t} s={scale}: theta={:.4} M={} qubits={} depth={} rxx={}",
            plan.theta,
            plan.steps,
            c.n_qubits(),
            m.depth,
            m.two_qubit_gate_count
        );
    }
    let c = build_trotter_circuit(&params, 0.004, 1, &phi0)?;
    for line in serialize_circuit(&c).lines().take(8) {
        let short: String = line.chars().take(100).collect();
        println!("  {short}");
    }
    Ok(())
}
