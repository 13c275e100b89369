//! A model with user-supplied dynamics and reward: three states on a line,
//! agents drift toward the crowd and pay for moving.
//!
//! ```text
//! cargo run --release --example custom_model
//! ```

use std::sync::Arc;

use mfchaos::cmkv::{value_iteration, KernelFamily, SimplexGrid};
use mfchaos::lift::randomized_lipschitz;
use mfchaos::lipschitz::{estimate_lipschitz_constants, LipschitzProbe};
use mfchaos::nagent::solve_vn;
use mfchaos::{FiniteMetricSpace, Measure, ModelParts, ModelSpec, NoiseSpec, RewardRule, TransitionRule};

fn main() -> mfchaos::Result<()> {
    // action 0 stays, 1 steps left, 2 steps right; with probability 1/4 the
    // step is replaced by a move toward the most crowded state
    let transition = Arc::new(|x: usize, a: usize, joint: &Measure, e: usize, _e0: usize| {
        let mass: Vec<f64> = (0..3).map(|s| joint[3 * s] + joint[3 * s + 1] + joint[3 * s + 2]).collect();
        let crowd = (0..3).fold(0, |b, s| if mass[s] > mass[b] { s } else { b });
        let target = if e == 0 { crowd } else { [x, x.saturating_sub(1), (x + 1).min(2)][a] };
        if target > x { x + 1 } else if target < x { x - 1 } else { x }
    });
    let reward = Arc::new(|x: usize, a: usize, joint: &Measure| {
        let here: f64 = (0..3).map(|b| joint[3 * x + b]).sum();
        here - 0.3 * f64::from(a != 0)
    });
    let model = ModelSpec::new(ModelParts {
        states: FiniteMetricSpace::line(3),
        actions: FiniteMetricSpace::discrete(3),
        noise: NoiseSpec::uniform(4, 1),
        transition: TransitionRule::Custom { name: "herding".into(), rule: transition },
        reward: RewardRule::Custom { name: "crowding".into(), rule: reward },
        beta: 0.6,
        k_big_f: 2.0,
        k_f: 2.0,
    })?;
    let lip = estimate_lipschitz_constants(&model, &LipschitzProbe { samples: 2000, seed: 1, grid_denominator: Some(6) })?;
    println!("gamma {:.3}; K_F estimate {:.3}, K_f estimate {:.3}", model.gamma(), lip.k_big_f_hat, lip.k_f_hat);

    let grid = Arc::new(SimplexGrid::new(3, 12)?);
    let sol = value_iteration(&model, grid, KernelFamily::Randomized { steps: 2 }, 1e-6)?;
    let spread = Measure::uniform(3);
    println!("V(uniform) = {:.5} after {} sweeps", sol.table.evaluate(&spread)?, sol.sweeps);
    // the state metric is not uniform, so the randomized lift's coupling
    // constant has to be read off the extracted policy
    println!("action-Lipschitz K = {:.4}", randomized_lipschitz(&sol.policy, model.actions()));
    let vn = solve_vn(&model, 3, 1e-6)?;
    println!("V_3 at one agent per state = {:.5}", vn.table.value(&[0, 1, 2]));
    Ok(())
}
