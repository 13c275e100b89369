use serde::{Deserialize, Serialize};

use crate::compose;

/// Number of agents in each state.
pub fn counts_of(x: &[usize], n_states: usize) -> Vec<usize> {
    let mut c = vec![0usize; n_states];
    for &v in x {
        c[v] += 1;
    }
    c
}

/// Sorted copy of a joint state: the canonical member of its orbit.
pub fn canonicalize(x: &[usize]) -> Vec<usize> {
    let mut v = x.to_vec();
    v.sort_unstable();
    v
}

/// Number of joint states with the given counts (a multinomial coefficient).
pub fn class_size(counts: &[usize]) -> u128 {
    let mut left = counts.iter().sum::<usize>() as u64;
    let mut size = 1u128;
    for &c in counts {
        size *= compose::binomial(left, c as u64);
        left -= c as u64;
    }
    size
}

/// Orbit of a joint state under permutations of the agents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalClass {
    /// Sorted joint state.
    pub representative: Vec<usize>,
    pub counts: Vec<usize>,
    pub size: u128,
}

/// The state-count classes of `N` agents, in reverse-lexicographic count
/// order (all agents in state 0 first).
#[derive(Debug, Clone)]
pub struct ClassIndex {
    n: usize,
    n_states: usize,
    classes: Vec<Vec<usize>>,
}

impl ClassIndex {
    pub fn new(n: usize, n_states: usize) -> Self {
        Self { n, n_states, classes: compose::compositions(n, n_states) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn counts(&self, i: usize) -> &[usize] {
        &self.classes[i]
    }

    pub fn class(&self, i: usize) -> CanonicalClass {
        let counts = self.classes[i].clone();
        CanonicalClass { representative: self.representative(i), size: class_size(&counts), counts }
    }

    /// Sorted joint state with the class's counts.
    pub fn representative(&self, i: usize) -> Vec<usize> {
        self.classes[i].iter().enumerate().flat_map(|(s, &c)| std::iter::repeat_n(s, c)).collect()
    }

    pub fn index_of_counts(&self, counts: &[usize]) -> usize {
        class_rank(counts)
    }

    pub fn index_of_state(&self, x: &[usize]) -> usize {
        class_rank(&counts_of(x, self.n_states))
    }
}

/// Position of a composition in reverse-lexicographic order.
pub(crate) fn class_rank(counts: &[usize]) -> usize {
    let k = counts.len();
    let mut remaining: usize = counts.iter().sum();
    let mut r = 0u128;
    for (i, &c) in counts.iter().enumerate().take(k.saturating_sub(1)) {
        // compositions placing more than c in slot i come first
        for v in c + 1..=remaining {
            r += compose::composition_count(remaining - v, k - i - 1);
        }
        remaining -= c;
    }
    r as usize
}
