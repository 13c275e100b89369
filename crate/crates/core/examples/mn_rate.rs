//! How fast does an empirical measure approach its law? Estimate
//! `M_N = sup_μ E[W₁(μ_N, μ)]` on a four-point space and fit the log-log slope.
//!
//! ```text
//! cargo run --release --example mn_rate
//! ```

use mfchaos::bench::{fit_loglog, mn_hat};
use mfchaos::{FiniteMetricSpace, ProductSpace};

fn main() -> mfchaos::Result<()> {
    let space = ProductSpace::new(FiniteMetricSpace::discrete(2), FiniteMetricSpace::discrete(2));
    let mut points = Vec::new();
    for n in [16, 32, 64, 128, 256, 512] {
        let est = mn_hat(&space, n, 1000, 11)?;
        println!("N = {n:>4}  M_N ≈ {:.5} ± {:.1e}", est.value, est.stderr);
        points.push((n as f64, est.value));
    }
    let fit = fit_loglog(&points)?;
    println!("slope {:.3} (the finite-space rate is N^-1/2)", fit.slope);
    Ok(())
}
