//! Match two point families on the line so the average distance is minimal.
//!
//! ```text
//! cargo run --release --example optimal_permutation
//! ```

use mfchaos::transport::{empirical_measure, optimal_permutation, w1_distance};
use mfchaos::FiniteMetricSpace;

fn main() -> mfchaos::Result<()> {
    let line = FiniteMetricSpace::line(6);
    let y = [0, 5, 2, 2, 4];
    let y_prime = [1, 1, 5, 3, 0];
    let m = optimal_permutation(&line, &y, &y_prime)?;
    for (i, &j) in m.sigma.iter().enumerate() {
        println!("y[{i}] = {} -> y'[{j}] = {}", y[i], y_prime[j]);
    }
    // the matching cost is W₁ between the two empirical measures
    let w = w1_distance(&line, &empirical_measure(&y, 6)?, &empirical_measure(&y_prime, 6)?);
    println!("matching cost {:.4}, W1 of empirical measures {w:.4}", m.cost);
    Ok(())
}
