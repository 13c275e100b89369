//! The conditional McKean–Vlasov MDP on a discretized simplex.
//!
//! The population law lives on a [`SimplexGrid`]; lifted actions are
//! [`ActionKernel`]s, and [`value_iteration`] iterates the lifted Bellman
//! operator to a [`ValueTable`] together with a greedy [`MeanFieldPolicy`].

mod artifact;
mod grid;
mod kernel;
mod solver;

pub use artifact::{MeanFieldArtifact, NodeRecord};
pub use grid::{SimplexGrid, MAX_GRID_NODES};
pub use kernel::{kernel_from_joint, sample_action, ActionKernel, KernelFamily, DEFAULT_KERNEL_CAP};
pub use solver::{
    bellman_apply_kernel, bellman_sup, family_gap, holder_quotient, next_measure, policy_gain, population_reward,
    probe_nodes, sweep_bound, value_iteration, GainEstimate, Interpolation, MeanFieldPolicy, MeanFieldSolution,
    ValueTable, FAMILY_PROBES, TRANSITION_TABLE_CAP,
};
pub(crate) use solver::first_argmax;
