//! Turn the mean-field policy into N-agent policies, both ways, and see how
//! much value each loses against the N-agent optimum.
//!
//! ```text
//! cargo run --release --example lift_policies
//! ```

use mfchaos::bench::{mn_hat, BenchContext};
use mfchaos::config::Config;
use mfchaos::lift::{lift_feedback, lift_gap, lift_randomized, GapEvaluation, LiftMode};

fn main() -> mfchaos::Result<()> {
    let ctx = BenchContext::new(&Config::reference())?;
    let (model, policy) = (&ctx.model, &ctx.solution.policy);

    let x = [0, 0, 1, 1, 1, 0];
    let (a, cost) = lift_feedback(model, policy, &x)?;
    println!("feedback lift at {x:?}: {a:?} (coupling cost {cost:.4})");
    let a = lift_randomized(policy, &x, &[0.1, 0.5, 0.9, 0.3, 0.7, 0.99])?;
    println!("randomized lift with fixed uniforms: {a:?}");

    for n in [2, 4, 6, 8] {
        let m = mn_hat(model.product(), n, 2000, 7)?.value;
        let x0 = vec![0; n];
        for mode in [LiftMode::Feedback, LiftMode::Randomized] {
            let r = lift_gap(model, policy, mode, &x0, GapEvaluation::Exact { tol: 1e-8 }, m, ctx.solution.epsilon)?;
            println!("N = {n} {:<10}  V_N {:.5}  V_lift {:.5}  gap {:.2e}", mode.as_str(), r.v_n, r.v_lift, r.gap);
        }
    }
    Ok(())
}
