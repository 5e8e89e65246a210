//! DAG view of a Trotter circuit: edge list, per-qubit lightcones and the
//! pooling sets used by the corrector's output slots.

use qburgers::circuit::build_trotter_circuit;
use qburgers::circuit_graph::{circuit_to_dag, compute_lightcones, dag_to_edge_list};
use qburgers::classical::initial_state;
use qburgers::dataset::ExperimentParams;

fn main() -> qburgers::Result<()> {
    let params = ExperimentParams::new(0.05, 2e-3, 8, 1.0);
    let (_, _, phi0) = initial_state(&params)?;
    let circuit = build_trotter_circuit(&params, 0.004, 1, &phi0)?;
    let dag = circuit_to_dag(&circuit);
    print!("{}", dag_to_edge_list(&dag));

    let masks = compute_lightcones(&dag);
    for q in 0..masks.n_qubits() {
        println!("lightcone q{q}: {:?}", masks.mask(q));
    }
    for k in 0..params.n_grid {
        println!("slot {k}: pools {} nodes", masks.slot_union(k).len());
    }
    Ok(())
}
