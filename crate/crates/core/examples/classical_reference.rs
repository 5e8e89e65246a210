//! Classical Cole–Hopf reference for one parameter combination.
//!
//! ```text
//! cargo run --release --example classical_reference -- 0.05 16 2.0
//! ```

use qburgers::classical::classical_reference;
use qburgers::dataset::ExperimentParams;
use qburgers::krylov::KrylovConfig;

fn main() -> qburgers::Result<()> {
    let mut args = std::env::args().skip(1);
    let nu: f64 = args.next().map_or(0.05, |s| s.parse().expect("nu"));
    let n: usize = args.next().map_or(16, |s| s.parse().expect("N"));
    let ul: f64 = args.next().map_or(1.0, |s| s.parse().expect("u_L"));
    let params = ExperimentParams::new(nu, 1e-3, n, ul);

    let times = [0.0, 0.0025, 0.005, 0.0075, 0.01];
    for snap in classical_reference(&params, &times, &KrylovConfig::default())? {
        let u: Vec<String> = snap
            .velocity
            .values
            .iter()
            .map(|v| format!("{v:.3}"))
            .collect();
        println!(
            "t={:<7} shock x={:.3} dissipation={:.4e}\n  u = [{}]",
            snap.t,
            snap.diagnostics.shock_position,
            snap.diagnostics.dissipation,
            u.join(", ")
        );
    }
    Ok(())
}
