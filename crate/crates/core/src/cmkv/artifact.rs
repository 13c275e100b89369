use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::SimplexGrid;
use super::kernel::{ActionKernel, KernelFamily};
use super::solver::{MeanFieldPolicy, MeanFieldSolution, ValueTable};
use crate::error::{Error, Result};
use crate::space::FiniteMetricSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub counts: Vec<usize>,
    pub value: f64,
    pub kernel: ActionKernel,
}

/// Serializable form of a [`MeanFieldSolution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldArtifact {
    pub denominator: usize,
    pub n_states: usize,
    pub family: KernelFamily,
    pub tol: f64,
    pub residual: f64,
    pub sweeps: usize,
    pub family_gap: f64,
    pub epsilon: f64,
    pub nodes: Vec<NodeRecord>,
}

impl MeanFieldSolution {
    pub fn to_artifact(&self) -> MeanFieldArtifact {
        let grid = self.table.grid();
        let nodes = (0..grid.len())
            .map(|i| NodeRecord {
                counts: grid.counts(i).to_vec(),
                value: self.table.values()[i],
                kernel: self.policy.node_kernel(i).clone(),
            })
            .collect();
        MeanFieldArtifact {
            denominator: grid.denominator(),
            n_states: grid.n_states(),
            family: self.family,
            tol: self.tol,
            residual: self.residual,
            sweeps: self.sweeps,
            family_gap: self.family_gap,
            epsilon: self.epsilon,
            nodes,
        }
    }

    /// Rebuild a solution over `space` from its artifact. Nodes may appear
    /// in any order; each is matched by its counts.
    pub fn from_artifact(art: &MeanFieldArtifact, space: &FiniteMetricSpace) -> Result<Self> {
        let grid = SimplexGrid::new(art.n_states, art.denominator)?;
        if art.nodes.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: art.nodes.len() });
        }
        let mut values = vec![f64::NAN; grid.len()];
        let mut kernels: Vec<Option<ActionKernel>> = vec![None; grid.len()];
        for rec in &art.nodes {
            let i = grid
                .node_of_counts(&rec.counts)
                .ok_or_else(|| Error::Config(format!("counts {:?} are not a grid node", rec.counts)))?;
            values[i] = rec.value;
            kernels[i] = Some(ActionKernel::new(rec.kernel.rows().to_vec())?);
        }
        let kernels = kernels
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Config("artifact repeats a grid node".into()))?;
        let grid = Arc::new(grid);
        Ok(Self {
            table: ValueTable::new(grid.clone(), space.clone(), values)?,
            policy: MeanFieldPolicy::new(grid, space.clone(), kernels)?,
            family: art.family,
            tol: art.tol,
            residual: art.residual,
            sweeps: art.sweeps,
            family_gap: art.family_gap,
            epsilon: art.epsilon,
        })
    }
}
