//! Model specification: spaces, noises, transition rule, reward, discount
//! and the scalar constants derived from them.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::compose;
use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::space::{FiniteMetricSpace, Metric, ProductSpace};

/// User-supplied transition `(x, a, joint law on X×A, e, e0) -> x'`.
pub type CustomTransition = Arc<dyn Fn(usize, usize, &Measure, usize, usize) -> usize + Send + Sync>;
/// User-supplied reward `(x, a, joint law on X×A) -> f`.
pub type CustomReward = Arc<dyn Fn(usize, usize, &Measure) -> f64 + Send + Sync>;

/// Idiosyncratic and common noise distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub idio: Measure,
    pub common: Measure,
}

impl NoiseSpec {
    pub fn new(idio: Measure, common: Measure) -> Self {
        Self { idio, common }
    }

    pub fn uniform(idio_size: usize, common_size: usize) -> Self {
        Self { idio: Measure::uniform(idio_size), common: Measure::uniform(common_size) }
    }

    pub fn idio_size(&self) -> usize {
        self.idio.len()
    }

    pub fn common_size(&self) -> usize {
        self.common.len()
    }
}

/// Binary-state threshold dynamics driven by the population mass in state 1.
///
/// With `u_e = (e + 1/2) / |E|`, the next state is 1 iff
/// `u_e < clamp(m1 + eta * a + eta0 * c(e0), 0, 1)`, where `m1` is the mass
/// of state 1 under the state marginal of the joint law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfluenceThreshold {
    pub eta: f64,
    #[serde(default)]
    pub eta0: f64,
    /// `c(e0)` for each common-noise index. Empty means zero shift.
    #[serde(default)]
    pub common_levels: Vec<f64>,
}

impl InfluenceThreshold {
    pub fn threshold(&self, n_actions: usize, joint: &Measure, a: usize, e0: usize) -> f64 {
        let m1: f64 = joint.weights()[n_actions..2 * n_actions].iter().sum();
        let shift = self.common_levels.get(e0).copied().unwrap_or(0.0);
        (m1 + self.eta * a as f64 + self.eta0 * shift).clamp(0.0, 1.0)
    }

    #[inline]
    pub fn grid_point(e: usize, n_idio: usize) -> f64 {
        (e as f64 + 0.5) / n_idio as f64
    }
}

#[derive(Clone)]
pub enum TransitionRule {
    InfluenceThreshold(InfluenceThreshold),
    /// `F(x, ..) = x`.
    Identity,
    /// `F ≡ state`.
    Constant { state: usize },
    Custom { name: String, rule: CustomTransition },
}

impl fmt::Debug for TransitionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InfluenceThreshold(p) => f.debug_tuple("InfluenceThreshold").field(p).finish(),
            Self::Identity => write!(f, "Identity"),
            Self::Constant { state } => write!(f, "Constant({state})"),
            Self::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

#[derive(Clone)]
pub enum RewardRule {
    /// `f = state_coef * x + action_coef * a`, indices read as numbers.
    Linear { state_coef: f64, action_coef: f64 },
    Constant { value: f64 },
    /// `f = d(x, target)`.
    DistanceTo { target: usize },
    Custom { name: String, rule: CustomReward },
}

impl fmt::Debug for RewardRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Linear { state_coef, action_coef } => {
                write!(f, "Linear({state_coef}, {action_coef})")
            }
            Self::Constant { value } => write!(f, "Constant({value})"),
            Self::DistanceTo { target } => write!(f, "DistanceTo({target})"),
            Self::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// Denominator of the joint-measure grid swept to record the reward range.
pub const REWARD_SWEEP_DENOMINATOR: usize = 20;
const REWARD_SWEEP_CAP: u128 = 200_000;

/// Complete description of the controlled system shared by the N-agent MDP
/// and its mean-field limit. Immutable once built.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    states: FiniteMetricSpace,
    actions: FiniteMetricSpace,
    product: ProductSpace,
    noise: NoiseSpec,
    transition: TransitionRule,
    reward: RewardRule,
    beta: f64,
    k_big_f: f64,
    k_f: f64,
    reward_min: f64,
    reward_max: f64,
    reward_sweep_exhaustive: bool,
}

/// Builder-style parameters for [`ModelSpec::new`].
#[derive(Debug, Clone)]
pub struct ModelParts {
    pub states: FiniteMetricSpace,
    pub actions: FiniteMetricSpace,
    pub noise: NoiseSpec,
    pub transition: TransitionRule,
    pub reward: RewardRule,
    pub beta: f64,
    pub k_big_f: f64,
    pub k_f: f64,
}

impl ModelSpec {
    pub fn new(parts: ModelParts) -> Result<Self> {
        let ModelParts { states, actions, noise, transition, reward, beta, k_big_f, k_f } = parts;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Domain(format!("beta must lie in (0,1), got {beta}")));
        }
        if !(k_big_f > 0.0) || !(k_f > 0.0) {
            return Err(Error::Domain("Lipschitz constants must be positive".into()));
        }
        match &transition {
            TransitionRule::InfluenceThreshold(p) => {
                if states.size() != 2 {
                    return Err(Error::Config("influence_threshold needs exactly two states".into()));
                }
                if !p.common_levels.is_empty() && p.common_levels.len() != noise.common_size() {
                    return Err(Error::Config(format!(
                        "common_levels has {} entries but the common noise has {}",
                        p.common_levels.len(),
                        noise.common_size()
                    )));
                }
            }
            TransitionRule::Constant { state } => states.check_index(*state)?,
            _ => {}
        }
        if let RewardRule::DistanceTo { target } = &reward {
            states.check_index(*target)?;
        }
        let product = ProductSpace::new(states.clone(), actions.clone());
        let mut model = Self {
            states,
            actions,
            product,
            noise,
            transition,
            reward,
            beta,
            k_big_f,
            k_f,
            reward_min: 0.0,
            reward_max: 0.0,
            reward_sweep_exhaustive: true,
        };
        model.sweep_reward();
        Ok(model)
    }

    fn sweep_reward(&mut self) {
        let cells = self.product.size();
        let count = compose::composition_count(REWARD_SWEEP_DENOMINATOR, cells);
        let measures: Vec<Measure> = if count <= REWARD_SWEEP_CAP {
            compose::compositions(REWARD_SWEEP_DENOMINATOR, cells)
                .iter()
                .map(|c| Measure::from_counts(c))
                .collect()
        } else {
            self.reward_sweep_exhaustive = false;
            let mut v: Vec<Measure> = (0..cells).map(|i| Measure::point_mass(cells, i)).collect();
            v.push(Measure::uniform(cells));
            for i in 0..cells {
                for j in i + 1..cells {
                    v.push(Measure::point_mass(cells, i).mix(&Measure::point_mass(cells, j), 0.5));
                }
            }
            v
        };
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for m in &measures {
            for x in 0..self.states.size() {
                for a in 0..self.actions.size() {
                    let r = self.reward(x, a, m);
                    lo = lo.min(r);
                    hi = hi.max(r);
                }
            }
        }
        self.reward_min = lo;
        self.reward_max = hi;
    }

    #[inline]
    pub fn transition(&self, x: usize, a: usize, joint: &Measure, e: usize, e0: usize) -> usize {
        match &self.transition {
            TransitionRule::InfluenceThreshold(p) => {
                let t = p.threshold(self.actions.size(), joint, a, e0);
                usize::from(InfluenceThreshold::grid_point(e, self.noise.idio_size()) < t)
            }
            TransitionRule::Identity => x,
            TransitionRule::Constant { state } => *state,
            TransitionRule::Custom { rule, .. } => rule(x, a, joint, e, e0),
        }
    }

    #[inline]
    pub fn reward(&self, x: usize, a: usize, joint: &Measure) -> f64 {
        match &self.reward {
            RewardRule::Linear { state_coef, action_coef } => state_coef * x as f64 + action_coef * a as f64,
            RewardRule::Constant { value } => *value,
            RewardRule::DistanceTo { target } => self.states.dist(x, *target),
            RewardRule::Custom { rule, .. } => rule(x, a, joint),
        }
    }

    /// Law of the next state of one agent at `(x, a)` given the common noise,
    /// with the idiosyncratic noise integrated out.
    pub fn next_state_law(&self, x: usize, a: usize, joint: &Measure, e0: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (e, &w) in self.noise.idio.weights().iter().enumerate() {
            if w > 0.0 {
                out[self.transition(x, a, joint, e, e0)] += w;
            }
        }
    }

    pub fn states(&self) -> &FiniteMetricSpace {
        &self.states
    }

    pub fn actions(&self) -> &FiniteMetricSpace {
        &self.actions
    }

    pub fn product(&self) -> &ProductSpace {
        &self.product
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn n_states(&self) -> usize {
        self.states.size()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.size()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn k_big_f(&self) -> f64 {
        self.k_big_f
    }

    pub fn k_f(&self) -> f64 {
        self.k_f
    }

    pub fn transition_rule(&self) -> &TransitionRule {
        &self.transition
    }

    pub fn reward_rule(&self) -> &RewardRule {
        &self.reward
    }

    /// `max f - min f` over the construction sweep.
    pub fn reward_range(&self) -> f64 {
        self.reward_max - self.reward_min
    }

    /// `max |f|` over the construction sweep.
    pub fn reward_sup(&self) -> f64 {
        self.reward_max.abs().max(self.reward_min.abs())
    }

    pub fn reward_sweep_exhaustive(&self) -> bool {
        self.reward_sweep_exhaustive
    }

    /// Convergence exponent for this model's discount and declared `K_F`.
    pub fn gamma(&self) -> f64 {
        gamma_exponent(self.beta, self.k_big_f).expect("validated at construction")
    }

    /// Same model with a different discount factor.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Domain(format!("beta must lie in (0,1), got {beta}")));
        }
        Ok(Self { beta, ..self.clone() })
    }
}

/// `min(1, |ln β| / ln(2 K_F)_+)`, read as 1 when `2 K_F <= 1`.
pub fn gamma_exponent(beta: f64, k_big_f: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta must lie in (0,1), got {beta}")));
    }
    if !(k_big_f > 0.0) {
        return Err(Error::Domain(format!("K_F must be positive, got {k_big_f}")));
    }
    let denom = (2.0 * k_big_f).ln().max(0.0);
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((beta.ln().abs() / denom).min(1.0))
}

/// Default ceiling for [`truncation_horizon`].
pub const MAX_HORIZON: usize = 100_000;

/// Smallest `T >= 0` with `β^T · bound / (1 - β) <= tol`.
pub fn truncation_horizon(beta: f64, reward_bound: f64, tol: f64) -> Result<usize> {
    truncation_horizon_capped(beta, reward_bound, tol, MAX_HORIZON)
}

pub fn truncation_horizon_capped(beta: f64, reward_bound: f64, tol: f64, cap: usize) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta must lie in (0,1), got {beta}")));
    }
    let mut tail = reward_bound.abs() / (1.0 - beta);
    let mut t = 0;
    while tail > tol {
        if t >= cap {
            return Err(Error::cap("truncation horizon", t as u128 + 1, cap as u128));
        }
        tail *= beta;
        t += 1;
    }
    Ok(t)
}
