//! W₁ between two laws on a small graph metric, by the primal transport
//! problem and by the Kantorovich dual, plus the optimal coupling.
//!
//! ```text
//! cargo run --release --example wasserstein_duality
//! ```

use mfchaos::transport::{kantorovich_dual, wasserstein1};
use mfchaos::{FiniteMetricSpace, Measure};

fn main() -> mfchaos::Result<()> {
    // a path a - b - c with a shortcut a - c of length 1.5
    let space = FiniteMetricSpace::new(
        vec!["a".into(), "b".into(), "c".into()],
        vec![vec![0.0, 1.0, 1.5], vec![1.0, 0.0, 1.0], vec![1.5, 1.0, 0.0]],
    )?;
    let mu = Measure::new(vec![0.6, 0.3, 0.1])?;
    let nu = Measure::new(vec![0.1, 0.2, 0.7])?;

    let (w, coupling) = wasserstein1(&space, &mu, &nu)?;
    let dual = kantorovich_dual(&space, &mu, &nu)?;
    println!("primal W1 = {w:.6}");
    println!("dual   W1 = {:.6}  potential = {:?}", dual.value, dual.potential);
    println!("coupling (rows: mu, cols: nu):");
    for row in &coupling.plan {
        println!("  {:?}", row.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>());
    }
    Ok(())
}
