//! Exact optimal values of the N-agent problem on state-count classes, next
//! to the mean-field value at the same empirical measure.
//!
//! ```text
//! cargo run --release --example solve_nagent
//! ```

use mfchaos::bench::BenchContext;
use mfchaos::config::Config;
use mfchaos::nagent::{solve_vn, ClassIndex};
use mfchaos::Measure;

fn main() -> mfchaos::Result<()> {
    let ctx = BenchContext::new(&Config::reference())?;
    for n in [2, 4, 8] {
        let sol = solve_vn(&ctx.model, n, 1e-8)?;
        let idx = ClassIndex::new(n, ctx.model.n_states());
        println!("N = {n}: {} classes, {} sweeps", idx.len(), sol.sweeps);
        for c in 0..idx.len() {
            let counts = idx.counts(c);
            let v_mf = ctx.solution.table.evaluate(&Measure::from_counts(counts))?;
            println!("  counts {counts:?}  V_N {:.5}  V(mu_N) {:.5}  actions {:?}", sol.table.values[c], v_mf, sol.choices[c]);
        }
    }
    Ok(())
}
