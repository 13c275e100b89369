//! Solve the reference mean-field problem and inspect the extracted policy.
//!
//! ```text
//! cargo run --release --example solve_mean_field
//! ```

use std::sync::Arc;

use mfchaos::cmkv::{policy_gain, value_iteration, SimplexGrid};
use mfchaos::config::Config;
use mfchaos::Measure;

fn main() -> mfchaos::Result<()> {
    let cfg = Config::reference();
    let model = cfg.model.build()?;
    let grid = Arc::new(SimplexGrid::new(model.n_states(), cfg.solver.q)?);
    let sol = value_iteration(&model, grid.clone(), cfg.solver.family()?, cfg.solver.tol)?;
    println!("sweeps {}  residual {:.2e}  family gap {:.2e}  eps {:.2e}", sol.sweeps, sol.residual, sol.family_gap, sol.epsilon);

    for node in [0, grid.len() / 2, grid.len() - 1] {
        let k = sol.policy.node_kernel(node);
        println!("mu = {:?}  V = {:.6}  kernel = {:?}", grid.measure(node).weights(), sol.table.values()[node], k.rows());
    }

    let mu0 = Measure::uniform(2);
    let gain = policy_gain(&model, &sol.policy, &mu0, 40, 2000, 7)?;
    println!(
        "gain from uniform: {:.6} ± {:.1e} (V = {:.6})",
        gain.mean,
        gain.stderr,
        sol.table.evaluate(&mu0)?
    );
    Ok(())
}
