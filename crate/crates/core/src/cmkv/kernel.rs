use serde::{Deserialize, Serialize};

use crate::compose;
use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::space::{Metric, ProductSpace};

/// Default ceiling on the number of kernels a family may enumerate.
pub const DEFAULT_KERNEL_CAP: u128 = 1_000_000;
const ZERO_MASS: f64 = 1e-12;

/// Per-state distribution over actions: `rows[x][a] = κ(a | x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionKernel {
    rows: Vec<Vec<f64>>,
}

impl ActionKernel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::Domain("kernel needs at least one state".into()));
        };
        let n_a = first.len();
        for (x, row) in rows.iter().enumerate() {
            if row.len() != n_a {
                return Err(Error::LengthMismatch { expected: n_a, got: row.len() });
            }
            Measure::new(row.clone()).map_err(|e| Error::InvalidMeasure(format!("kernel row {x}: {e}")))?;
        }
        Ok(Self { rows })
    }

    /// Point mass at `actions[x]` in every row.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        let mut rows = Vec::with_capacity(actions.len());
        for &a in actions {
            if a >= n_actions {
                return Err(Error::IndexOutOfRange { index: a, size: n_actions });
            }
            rows.push(Measure::point_mass(n_actions, a).into_weights());
        }
        Self::new(rows)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { rows: vec![vec![1.0 / n_actions as f64; n_actions]; n_states] }
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }

    pub fn n_actions(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// The action chosen in each row when every row is a point mass.
    pub fn as_deterministic(&self) -> Option<Vec<usize>> {
        self.rows.iter().map(|r| r.iter().position(|&p| p == 1.0)).collect()
    }

    /// `μ ⊗ κ`, the joint law with state marginal `mu`.
    pub fn joint(&self, mu: &Measure) -> Measure {
        let n_a = self.n_actions();
        let mut w = Vec::with_capacity(self.rows.len() * n_a);
        for (x, row) in self.rows.iter().enumerate() {
            w.extend(row.iter().map(|p| mu[x] * p));
        }
        Measure::from_raw(w)
    }

    /// Row-wise mixture `(1 - t) κ + t κ'`.
    pub fn mix(&self, other: &ActionKernel, t: f64) -> ActionKernel {
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(r, s)| r.iter().zip(s).map(|(a, b)| (1.0 - t) * a + t * b).collect())
            .collect();
        ActionKernel { rows }
    }
}

/// Disintegrate a joint law on `X × A` into its action kernel. Rows of
/// states with (numerically) zero mass are set to uniform.
pub fn kernel_from_joint(joint: &Measure, space: &ProductSpace) -> Result<ActionKernel> {
    if joint.len() != space.size() {
        return Err(Error::LengthMismatch { expected: space.size(), got: joint.len() });
    }
    let n_x = space.left().size();
    let n_a = space.right().size();
    let rows = (0..n_x)
        .map(|x| {
            let cell = &joint.weights()[x * n_a..(x + 1) * n_a];
            let m: f64 = cell.iter().sum();
            if m > ZERO_MASS {
                cell.iter().map(|w| w / m).collect()
            } else {
                vec![1.0 / n_a as f64; n_a]
            }
        })
        .collect();
    Ok(ActionKernel { rows })
}

/// Inverse-CDF sampling with half-open cells `[c_{k-1}, c_k)`.
pub fn sample_action(dist: &[f64], u: f64) -> usize {
    debug_assert!((0.0..1.0).contains(&u));
    let last = dist.iter().rposition(|&p| p > 0.0).unwrap_or(dist.len() - 1);
    let mut c = 0.0;
    for (a, &p) in dist.iter().enumerate().take(last) {
        c += p;
        if u < c {
            return a;
        }
    }
    last
}

/// The kernels the Bellman supremum ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum KernelFamily {
    /// Every row a point mass: `|A|^|X|` kernels.
    Deterministic,
    /// Row probabilities on the grid `k / steps`, i.e. step `r = 1 / steps`.
    Randomized { steps: usize },
}

impl KernelFamily {
    /// Randomized family with step `r`; `1 / r` must be a positive integer.
    pub fn randomized_step(r: f64) -> Result<Self> {
        let steps = (1.0 / r).round();
        if !(r > 0.0 && r <= 1.0) || (steps * r - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("kernel step {r} is not 1/k for a positive integer k")));
        }
        Ok(Self::Randomized { steps: steps as usize })
    }

    fn steps(self) -> usize {
        match self {
            Self::Deterministic => 1,
            Self::Randomized { steps } => steps,
        }
    }

    /// The same family with twice the resolution.
    pub fn refined(self) -> Self {
        Self::Randomized { steps: 2 * self.steps() }
    }

    pub fn count(self, n_states: usize, n_actions: usize) -> u128 {
        let per_row = compose::composition_count(self.steps(), n_actions);
        per_row.checked_pow(n_states as u32).unwrap_or(u128::MAX)
    }

    /// All kernels of the family. Rows are ordered from `δ_{a_0}` onwards
    /// (reverse-lexicographic counts) and kernels as an odometer with state
    /// 0 most significant; the argmax tie-break relies on this order.
    pub fn enumerate(self, n_states: usize, n_actions: usize, cap: u128) -> Result<Vec<ActionKernel>> {
        let count = self.count(n_states, n_actions);
        if count > cap {
            return Err(Error::cap("action kernels", count, cap));
        }
        let steps = self.steps();
        let row_choices: Vec<Vec<f64>> = compose::compositions(steps, n_actions)
            .into_iter()
            .map(|c| c.iter().map(|&k| k as f64 / steps as f64).collect())
            .collect();
        let m = row_choices.len();
        let mut digits = vec![0usize; n_states];
        let mut out = Vec::with_capacity(count as usize);
        loop {
            out.push(ActionKernel { rows: digits.iter().map(|&d| row_choices[d].clone()).collect() });
            let mut pos = n_states;
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < m {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }
}

impl Default for KernelFamily {
    fn default() -> Self {
        Self::Randomized { steps: 8 }
    }
}
