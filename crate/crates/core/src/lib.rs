//! Finite-space toolkit for cooperative N-agent Markov decision processes and
//! their conditional McKean–Vlasov (mean-field) limit.

pub mod artifact;
pub mod bench;
pub mod cmkv;
pub mod compose;
pub mod config;
pub mod error;
pub mod lp;
pub mod measure;
pub mod lift;
pub mod lipschitz;
pub mod model;
pub mod nagent;
pub mod rng;
pub mod space;
pub mod transport;

pub use error::{Error, Result};
pub use measure::Measure;
pub use model::{gamma_exponent, truncation_horizon, ModelParts, ModelSpec, NoiseSpec, RewardRule, TransitionRule};
pub use space::{FiniteMetricSpace, Metric, ProductSpace};
