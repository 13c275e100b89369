//! TOML configuration: the model, plus optional `[solver]` and `[bench]`
//! tables. Unknown keys are rejected everywhere.
//!
//! ```toml
//! beta = 0.5
//! k_big_f = 1.0
//! k_f = 1.0
//!
//! [state_space]
//! labels = ["0", "1"]
//! dist = [[0.0, 1.0], [1.0, 0.0]]
//!
//! [transition]
//! family = "influence_threshold"
//! params = { eta = 0.3 }
//! ```

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cmkv::KernelFamily;
use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::model::{CustomReward, CustomTransition, InfluenceThreshold, ModelParts, ModelSpec, NoiseSpec, RewardRule, TransitionRule};
use crate::space::FiniteMetricSpace;

/// The pinned reference model used by the benchmark and the acceptance tests.
pub const REFERENCE_TOML: &str = include_str!("../configs/reference.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub labels: Vec<String>,
    pub dist: Vec<Vec<f64>>,
}

impl SpaceConfig {
    pub fn build(&self) -> Result<FiniteMetricSpace> {
        FiniteMetricSpace::new(self.labels.clone(), self.dist.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub idio_size: usize,
    /// Uniform when omitted.
    #[serde(default)]
    pub idio_weights: Option<Vec<f64>>,
    pub common_size: usize,
    #[serde(default)]
    pub common_weights: Option<Vec<f64>>,
}

fn noise_law(size: usize, weights: &Option<Vec<f64>>, what: &str) -> Result<Measure> {
    if size == 0 {
        return Err(Error::Config(format!("{what} noise needs at least one value")));
    }
    match weights {
        None => Ok(Measure::uniform(size)),
        Some(w) if w.len() != size => {
            Err(Error::Config(format!("{what}_weights has {} entries, {what}_size is {size}", w.len())))
        }
        Some(w) => Measure::new(w.clone()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    pub family: String,
    #[serde(default = "empty_table")]
    pub params: toml::Table,
}

fn empty_table() -> toml::Table {
    toml::Table::new()
}

fn params<T: for<'de> Deserialize<'de>>(rule: &RuleConfig) -> Result<T> {
    toml::Value::Table(rule.params.clone())
        .try_into()
        .map_err(|e| Error::Config(format!("{} params: {e}", rule.family)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateParam {
    state: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearParams {
    state_coef: f64,
    action_coef: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ValueParam {
    value: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetParam {
    target: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NameParam {
    name: String,
}

/// Named user rules for `family = "custom"`, looked up by `params.name`.
#[derive(Default, Clone)]
pub struct Registry {
    transitions: HashMap<String, CustomTransition>,
    rewards: HashMap<String, CustomReward>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn transition(mut self, name: &str, rule: CustomTransition) -> Self {
        self.transitions.insert(name.into(), rule);
        self
    }

    pub fn reward(mut self, name: &str, rule: CustomReward) -> Self {
        self.rewards.insert(name.into(), rule);
        self
    }
}

/// Model section of a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub state_space: SpaceConfig,
    pub action_space: SpaceConfig,
    pub noise: NoiseConfig,
    pub transition: RuleConfig,
    pub reward: RuleConfig,
    pub beta: f64,
    pub k_big_f: f64,
    pub k_f: f64,
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec> {
        self.build_with(&Registry::default())
    }

    pub fn build_with(&self, registry: &Registry) -> Result<ModelSpec> {
        let transition = match self.transition.family.as_str() {
            "influence_threshold" => TransitionRule::InfluenceThreshold(params::<InfluenceThreshold>(&self.transition)?),
            "identity" => {
                params::<toml::Table>(&self.transition)?
                    .is_empty()
                    .then_some(())
                    .ok_or_else(|| Error::Config("identity takes no params".into()))?;
                TransitionRule::Identity
            }
            "constant" => TransitionRule::Constant { state: params::<StateParam>(&self.transition)?.state },
            "custom" => {
                let name = params::<NameParam>(&self.transition)?.name;
                let rule = registry
                    .transitions
                    .get(&name)
                    .ok_or_else(|| Error::Config(format!("no registered transition named {name:?}")))?;
                TransitionRule::Custom { name, rule: rule.clone() }
            }
            other => return Err(Error::Config(format!("unknown transition family {other:?}"))),
        };
        let reward = match self.reward.family.as_str() {
            "linear" => {
                let p = params::<LinearParams>(&self.reward)?;
                RewardRule::Linear { state_coef: p.state_coef, action_coef: p.action_coef }
            }
            "constant" => RewardRule::Constant { value: params::<ValueParam>(&self.reward)?.value },
            "distance_to" => RewardRule::DistanceTo { target: params::<TargetParam>(&self.reward)?.target },
            "custom" => {
                let name = params::<NameParam>(&self.reward)?.name;
                let rule = registry
                    .rewards
                    .get(&name)
                    .ok_or_else(|| Error::Config(format!("no registered reward named {name:?}")))?;
                RewardRule::Custom { name, rule: rule.clone() }
            }
            other => return Err(Error::Config(format!("unknown reward family {other:?}"))),
        };
        let noise = NoiseSpec::new(
            noise_law(self.noise.idio_size, &self.noise.idio_weights, "idio")?,
            noise_law(self.noise.common_size, &self.noise.common_weights, "common")?,
        );
        ModelSpec::new(ModelParts {
            states: self.state_space.build()?,
            actions: self.action_space.build()?,
            noise,
            transition,
            reward,
            beta: self.beta,
            k_big_f: self.k_big_f,
            k_f: self.k_f,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Simplex grid denominator.
    pub q: usize,
    /// `"deterministic"` or `"randomized"`.
    pub kernel_family: String,
    /// Probability step of the randomized family.
    pub kernel_step: f64,
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { q: 50, kernel_family: "randomized".into(), kernel_step: 0.125, tol: 1e-8 }
    }
}

impl SolverConfig {
    pub fn family(&self) -> Result<KernelFamily> {
        match self.kernel_family.as_str() {
            "deterministic" => Ok(KernelFamily::Deterministic),
            "randomized" => KernelFamily::randomized_step(self.kernel_step),
            other => Err(Error::Config(format!("unknown kernel family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub n_list: Vec<usize>,
    pub seed: u64,
    /// Monte-Carlo trials per candidate for `M̂_N`.
    pub mn_trials: usize,
    /// Sample sizes of the `M̂_N` rate fit.
    pub rate_n_list: Vec<usize>,
    /// Joint states sampled per N in the operator comparison.
    pub operator_samples: usize,
    /// Draws per N for the randomized-lift coupling check.
    pub lift_draws: usize,
    pub emit_plots: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_list: vec![2, 4, 6, 8],
            seed: 7,
            mn_trials: 2000,
            rate_n_list: vec![16, 32, 64, 128, 256, 512, 1024],
            operator_samples: 200,
            lift_draws: 5000,
            emit_plots: false,
        }
    }
}

/// A fully resolved config file.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub model: ModelConfig,
    pub solver: SolverConfig,
    pub bench: BenchConfig,
    resolved: toml::Table,
}

impl Config {
    pub fn reference() -> Self {
        Self::from_toml_str(REFERENCE_TOML, &[]).expect("reference config is valid")
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, overrides)
    }

    /// Parse, fill in the `[solver]`/`[bench]` defaults, then apply
    /// `dotted.key=value` overrides. An override must name a key that exists
    /// after defaults are filled in.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        for (key, default) in [
            ("solver", toml::Table::try_from(SolverConfig::default())),
            ("bench", toml::Table::try_from(BenchConfig::default())),
        ] {
            let default = default.map_err(|e| Error::Config(e.to_string()))?;
            let entry = table.entry(key).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(t) = entry else {
                return Err(Error::Config(format!("[{key}] must be a table")));
            };
            for (k, v) in default {
                t.entry(k).or_insert(v);
            }
        }
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        let mut model_table = table.clone();
        let solver = model_table.remove("solver").expect("inserted above");
        let bench = model_table.remove("bench").expect("inserted above");
        let model: ModelConfig = toml::Value::Table(model_table).try_into().map_err(cfg_err)?;
        let solver: SolverConfig = solver.try_into().map_err(cfg_err)?;
        let bench: BenchConfig = bench.try_into().map_err(cfg_err)?;
        if solver.q == 0 || !(solver.tol > 0.0) {
            return Err(Error::Config("solver.q and solver.tol must be positive".into()));
        }
        solver.family()?;
        if bench.n_list.is_empty() || bench.n_list.contains(&0) || bench.mn_trials == 0 {
            return Err(Error::Config("bench.n_list must be nonempty with positive entries; mn_trials positive".into()));
        }
        Ok(Self { model, solver, bench, resolved: table })
    }

    /// The resolved config as JSON, for embedding in artifacts.
    pub fn resolved_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.resolved).expect("TOML values map to JSON")
    }

    pub fn resolved_toml(&self) -> String {
        toml::to_string(&self.resolved).expect("resolved table serializes")
    }
}

fn cfg_err(e: toml::de::Error) -> Error {
    Error::Config(e.message().to_string())
}

fn apply_override(table: &mut toml::Table, ov: &str) -> Result<()> {
    let (key, raw) = ov.split_once('=').ok_or_else(|| Error::Config(format!("override {ov:?} is not key=value")))?;
    let key = key.trim();
    let path: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for part in &path[..path.len() - 1] {
        cur = match cur.get_mut(*part) {
            Some(toml::Value::Table(t)) => t,
            _ => return Err(Error::Config(format!("override names unknown key {key:?}"))),
        };
    }
    let leaf = path[path.len() - 1];
    if !cur.contains_key(leaf) {
        return Err(Error::Config(format!("override names unknown key {key:?}")));
    }
    let value = parse_value(raw.trim())?;
    cur.insert(leaf.to_string(), value);
    Ok(())
}

/// A TOML value, or a bare string when the text does not parse as one.
fn parse_value(raw: &str) -> Result<toml::Value> {
    let doc: std::result::Result<toml::Table, _> = format!("v = {raw}").parse();
    match doc {
        Ok(mut t) => Ok(t.remove("v").expect("parsed key")),
        Err(_) if !raw.is_empty() => Ok(toml::Value::String(raw.to_string())),
        Err(e) => Err(Error::Config(format!("bad override value {raw:?}: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_parses_and_builds() {
        let c = Config::reference();
        let m = c.model.build().unwrap();
        assert_eq!(m.n_states(), 2);
        assert_eq!(m.noise().idio_size(), 4);
        assert_eq!(c.solver.q, 50);
        assert_eq!(c.solver.family().unwrap(), KernelFamily::Randomized { steps: 8 });
    }

    #[test]
    fn overrides_must_name_existing_keys() {
        let c = Config::from_toml_str(REFERENCE_TOML, &["solver.q=10".into(), "beta=0.25".into()]).unwrap();
        assert_eq!(c.solver.q, 10);
        assert_eq!(c.model.beta, 0.25);
        let c = Config::from_toml_str(REFERENCE_TOML, &["solver.kernel_family=deterministic".into()]).unwrap();
        assert_eq!(c.solver.family().unwrap(), KernelFamily::Deterministic);
        assert!(Config::from_toml_str(REFERENCE_TOML, &["solver.qq=10".into()]).is_err());
        assert!(Config::from_toml_str(REFERENCE_TOML, &["nope=1".into()]).is_err());
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = format!("{REFERENCE_TOML}\nbetta = 0.4\n");
        assert!(Config::from_toml_str(&text, &[]).is_err());
        let text = REFERENCE_TOML.replace("[solver]", "[solver]\nqq = 3");
        assert!(Config::from_toml_str(&text, &[]).is_err());
    }
}
