//! Experiment configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use delaychain::bounds::{k_for_chain_quality, k_for_settlement, SecurityParams};
use delaychain::charstring::DEFAULT_NEGATIVE_CUTOFF;
use delaychain::delay::{DelayDistribution, DelaySpec};
use delaychain::leader::{JointLaw, LawEntry, LeaderConfig, LeaderModel, PartyId};
use delaychain::sim::checks::QualityMode;
use delaychain::sim::{Adversary, MaxDelayBalance, NullAdversary, PrivateChain, SimConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderSpec {
    /// Either `f` and `alpha`, or an explicit `law` table.
    pub f: Option<f64>,
    pub alpha: Option<f64>,
    pub law: Option<Vec<LawEntry>>,
    #[serde(flatten)]
    pub model: LeaderModel,
}

impl LeaderSpec {
    pub fn build(&self) -> Result<LeaderConfig, ConfigError> {
        let law = match (&self.law, self.f, self.alpha) {
            (Some(entries), None, None) => JointLaw::new(entries.clone()),
            (None, Some(f), Some(alpha)) => JointLaw::from_f_alpha(f, alpha),
            _ => return Err(invalid("leaders: give either `f` and `alpha`, or `law`")),
        }
        .map_err(|e| invalid(e.to_string()))?;
        LeaderConfig::new(law, self.model).map_err(|e| invalid(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Null,
    PrivateChain,
    MaxDelayBalance,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Null => "null",
            Policy::PrivateChain => "private_chain",
            Policy::MaxDelayBalance => "max_delay_balance",
        }
    }

    pub fn instantiate(self, s: i64, k: i64, parties: &[PartyId]) -> Box<dyn Adversary + Send> {
        match self {
            Policy::Null => Box::new(NullAdversary),
            Policy::PrivateChain => Box::new(PrivateChain::new(s, k, parties.to_vec())),
            Policy::MaxDelayBalance => Box::new(MaxDelayBalance::new(s, parties.len())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub policy: Policy,
}

/// How `k` is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertySpec {
    pub s: i64,
    /// Explicit confirmation depth.
    pub k: Option<u64>,
    /// Smallest `k` whose settlement bound is at most this.
    pub k_for_settlement_bound: Option<f64>,
    /// Smallest `k` whose chain-quality bound is at most this.
    pub k_for_chain_quality_bound: Option<f64>,
    /// Defaults to `s + 10k`.
    pub horizon: Option<i64>,
    /// Chain-quality threshold; defaults to `ε/2`.
    pub mu: Option<f64>,
    /// `I = {0, ..., parties - 1}`; defaults to every tracked party.
    pub parties: Option<u64>,
    /// Reference-slot count for common prefix; 0 disables it.
    #[serde(default)]
    pub common_prefix_t: i64,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSpec {
    #[serde(default = "yes")]
    pub settlement: bool,
    #[serde(default = "yes")]
    pub chain_quality: bool,
    #[serde(default = "default_mode")]
    pub quality_mode: QualityMode,
    /// Assert the margin and advantage inequalities on every violation.
    #[serde(default = "yes")]
    pub lemmas: bool,
    /// Grid stride for execution invariants; 0 disables them.
    #[serde(default)]
    pub invariants_stride: i64,
    /// Validate the fork of every n-th slot; 0 disables it.
    #[serde(default)]
    pub fork_every: i64,
}

fn default_mode() -> QualityMode {
    QualityMode::Special
}

impl Default for ChecksSpec {
    fn default() -> Self {
        ChecksSpec {
            settlement: true,
            chain_quality: true,
            quality_mode: QualityMode::Special,
            lemmas: true,
            invariants_stride: 0,
            fork_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub trials: u64,
    #[serde(default = "default_cutoff")]
    pub negative_cutoff: usize,
    pub leaders: LeaderSpec,
    pub delay: DelaySpec,
    pub adversary: AdversarySpec,
    pub property: PropertySpec,
    #[serde(default)]
    pub checks: ChecksSpec,
}

fn one() -> u64 {
    1
}

fn default_cutoff() -> usize {
    DEFAULT_NEGATIVE_CUTOFF
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    /// Checks the configuration and derives everything a run needs.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let leaders = self.leaders.build()?;
        let delay = self.delay.build().map_err(|e| invalid(e.to_string()))?;
        let params = SecurityParams::compute(leaders.params(), &delay).map_err(|e| invalid(e.to_string()))?;
        let tracked = leaders.tracked_parties();
        let n = self.property.parties.unwrap_or(tracked);
        if n == 0 || n > tracked {
            return Err(invalid(format!("parties = {n} must lie in 1..={tracked}")));
        }
        let parties: Vec<PartyId> = (0..n).map(PartyId).collect();
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        let p = &self.property;
        if p.s < 1 {
            return Err(invalid("s must be at least 1"));
        }
        let mu = p.mu.unwrap_or(params.epsilon / 2.0);
        let k = match (p.k, p.k_for_settlement_bound, p.k_for_chain_quality_bound) {
            (Some(k), None, None) => k,
            (None, Some(target), None) => {
                k_for_settlement(&params, parties.len(), target).map_err(|e| invalid(e.to_string()))?
            }
            (None, None, Some(target)) => {
                k_for_chain_quality(&params, mu, parties.len(), target).map_err(|e| invalid(e.to_string()))?
            }
            _ => return Err(invalid("give exactly one of k, k_for_settlement_bound, k_for_chain_quality_bound")),
        };
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        let k = k as i64;
        let horizon = p.horizon.unwrap_or(p.s + 10 * k);
        if horizon < p.s + k {
            return Err(invalid(format!("horizon {horizon} is shorter than s + k = {}", p.s + k)));
        }
        if p.common_prefix_t < 0 || p.common_prefix_t > horizon - k {
            return Err(invalid("common_prefix_t must lie in 0..=horizon - k"));
        }
        if self.checks.chain_quality && !(mu > 0.0) {
            return Err(invalid(format!("mu = {mu} must be positive")));
        }
        let mut sim = SimConfig::new(leaders, delay, horizon);
        sim.negative_cutoff = self.negative_cutoff;
        delaychain::charstring::check_law(sim.leaders.model, &sim.delay).map_err(|e| invalid(e.to_string()))?;
        Ok(Resolved { sim, params, parties, s: p.s, k, mu, horizon })
    }
}

/// A validated configuration.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub sim: SimConfig,
    pub params: SecurityParams,
    pub parties: Vec<PartyId>,
    pub s: i64,
    pub k: i64,
    pub mu: f64,
    pub horizon: i64,
}

impl Resolved {
    pub fn delay(&self) -> &DelayDistribution {
        &self.sim.delay
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
        name = "example"
        seed = 7
        trials = 3

        [leaders]
        f = 0.05
        alpha = 0.95
        model = "iid"
        population = 5

        [delay]
        kind = "geometric"
        q = 0.5

        [adversary]
        policy = "private_chain"

        [property]
        s = 200
        k_for_settlement_bound = 0.2
    "#;

    #[test]
    fn parses_and_resolves() {
        let cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.parties.len(), 5);
        assert_eq!(r.horizon, 200 + 10 * r.k);
        assert!((r.mu - r.params.epsilon / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_ambiguous_k() {
        let text = EXAMPLE.replace("k_for_settlement_bound = 0.2", "k = 5\nk_for_settlement_bound = 0.2");
        assert!(matches!(ExperimentConfig::from_toml(&text).unwrap().resolve(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = EXAMPLE.replace("seed = 7", "seed = 7\nsede = 8");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn one_time_model() {
        let text = EXAMPLE.replace("model = \"iid\"\n        population = 5", "model = \"one_time\"\n        observers = 3");
        let r = ExperimentConfig::from_toml(&text).unwrap().resolve().unwrap();
        assert_eq!(r.parties.len(), 3);
    }
}
