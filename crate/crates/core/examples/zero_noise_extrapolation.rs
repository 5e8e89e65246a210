//! Richardson extrapolation over noise scales 1 and 3 for a few snapshots.

use qburgers::classical::{classical_reference, initial_state};
use qburgers::dataset::ExperimentParams;
use qburgers::krylov::KrylovConfig;
use qburgers::mitigation::{run_zne, ZneConfig};
use qburgers::qagt::mae;
use qburgers::qsim::NoiseModel;

fn main() -> qburgers::Result<()> {
    let params = ExperimentParams::new(0.15, 1e-3, 16, 1.0);
    let (_, _, phi0) = initial_state(&params)?;
    let noise = NoiseModel::default();
    let times = [0.002, 0.006, 0.01];
    let refs = classical_reference(&params, &times, &KrylovConfig::default())?;
    println!(
        "{:>6} {:>10} {:>10} {:>10}",
        "t", "MAE s=1", "MAE s=3", "MAE ZNE"
    );
    for (t, r) in times.iter().zip(&refs) {
        let (u_zne, scales) = run_zne(&params, *t, &phi0, &noise, 8192, 21, &ZneConfig::default())?;
        let truth = &r.velocity.values;
        println!(
            "{t:>6} {:>10.4} {:>10.4} {:>10.4}",
            mae(&scales[0].velocity.values, truth)?,
            mae(&scales[1].velocity.values, truth)?,
            mae(&u_zne.values, truth)?
        );
    }
    Ok(())
}
