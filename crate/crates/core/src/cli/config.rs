//! Run configuration files.
//!
//! A config is a TOML document. Unknown keys anywhere are errors.
//!
//! ```toml
//! name = "bernoulli-m10"
//! horizon = 10000
//! trials = 50
//! seed = 7
//! log_every = 100        # optional, default 100
//! out = "results/bernoulli-m10"
//! parallel = true        # optional
//! timing = false         # optional; when off, wall-time columns are zero
//!
//! [environment]
//! kind = "bernoulli_chain"   # or poisson_chain, gem_mining, lower_bound, table
//! agents = 10
//! group_size = 2
//!
//! [policy]
//! kind = "eps_mats"          # or ucb_baseline, random
//! epsilon = 0.1
//! c = "ln_T"                 # or a positive number
//! gate = "per_arm"           # optional, or per_round
//! ```
//!
//! Environment parameters by kind:
//!
//! * `bernoulli_chain`, `poisson_chain`: `agents`, `group_size` (2 or 3).
//! * `gem_mining`: `villages` (default 5), `env_seed`.
//! * `lower_bound`: `rho`, `arms_per_agent` (optional, sized from `rho` when
//!   absent; the instance has `arms_per_agent + 1` arms), `x`, `delta`.
//! * `table`: `path`, relative to the config file.
//!
//! `out` is relative to the working directory.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::env::{self, ChainFamily, EnvError, Environment};
use crate::harness::Experiment;
use crate::policy::{Gate, PolicyConfig, PolicyError};

pub const DEFAULT_LOG_EVERY: u64 = 100;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{location}: {message}")]
    Parse { location: String, message: String },
    #[error("{location}: `{key}`: {message}")]
    Invalid {
        location: String,
        key: String,
        message: String,
    },
    #[error("override `{0}` must look like key=value")]
    Override(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: String,
    horizon: u64,
    trials: usize,
    seed: u64,
    #[serde(default)]
    log_every: Option<u64>,
    out: PathBuf,
    #[serde(default)]
    parallel: bool,
    #[serde(default)]
    timing: bool,
    environment: EnvSpec,
    policy: RawPolicy,
}

/// Environment selector and parameters.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    BernoulliChain {
        agents: usize,
        group_size: usize,
    },
    PoissonChain {
        agents: usize,
        group_size: usize,
    },
    GemMining {
        #[serde(default = "default_villages")]
        villages: usize,
        env_seed: u64,
    },
    LowerBound {
        rho: usize,
        #[serde(default)]
        arms_per_agent: Option<usize>,
        x: f64,
        delta: f64,
    },
    Table {
        path: PathBuf,
    },
}

fn default_villages() -> usize {
    5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawScale {
    Number(f64),
    Named(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawPolicy {
    EpsMats {
        epsilon: f64,
        c: RawScale,
        #[serde(default)]
        gate: RawGate,
    },
    UcbBaseline {
        range: f64,
    },
    Random,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawGate {
    #[default]
    PerArm,
    PerRound,
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub horizon: u64,
    pub trials: usize,
    pub seed: u64,
    pub log_every: u64,
    pub out: PathBuf,
    pub parallel: bool,
    pub timing: bool,
    pub environment: EnvSpec,
    pub policy: PolicyConfig,
    /// Directory that relative paths in the config resolve against.
    pub base_dir: PathBuf,
}

/// A `key=value` override applied to the TOML document before validation.
/// Dotted keys address nested tables, e.g. `policy.epsilon=0.05`.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub key: String,
    pub value: toml::Value,
}

impl Override {
    /// Values are read as TOML literals; anything else is taken as a string.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let (key, raw) = text
            .split_once('=')
            .ok_or_else(|| ConfigError::Override(text.to_string()))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Override(text.to_string()));
        }
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        Ok(Self {
            key: key.to_string(),
            value,
        })
    }

    pub fn new(key: &str, value: impl Into<toml::Value>) -> Self {
        Self {
            key: key.to_string(),
            value: value.into(),
        }
    }

    fn apply(&self, doc: &mut toml::Table, location: &str) -> Result<(), ConfigError> {
        let mut parts: Vec<&str> = self.key.split('.').collect();
        let leaf = parts.pop().expect("split yields at least one part");
        let mut table = doc;
        for part in parts {
            let entry = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry.as_table_mut().ok_or_else(|| ConfigError::Invalid {
                location: location.to_string(),
                key: self.key.clone(),
                message: format!("`{part}` is not a table"),
            })?;
        }
        table.insert(leaf.to_string(), self.value.clone());
        Ok(())
    }
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &[Override]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str_at(&text, &path.display().to_string(), base_dir, overrides)
    }

    /// Parses `text`; `location` names the source in error messages.
    pub fn from_str_at(
        text: &str,
        location: &str,
        base_dir: PathBuf,
        overrides: &[Override],
    ) -> Result<Self, ConfigError> {
        let parse_err = |e: toml::de::Error| ConfigError::Parse {
            location: location.to_string(),
            message: e.to_string().trim_end().to_string(),
        };
        let mut doc: toml::Table = toml::from_str(text).map_err(parse_err)?;
        for o in overrides {
            o.apply(&mut doc, location)?;
        }
        let raw = if overrides.is_empty() {
            toml::from_str::<RawConfig>(text).map_err(parse_err)?
        } else {
            // re-serialize so errors still carry a position
            let merged = toml::to_string(&doc).map_err(|e| ConfigError::Parse {
                location: location.to_string(),
                message: e.to_string(),
            })?;
            toml::from_str::<RawConfig>(&merged).map_err(|e| ConfigError::Parse {
                location: format!("{location} (with overrides)"),
                message: e.to_string().trim_end().to_string(),
            })?
        };
        raw.validate(location, base_dir)
    }

    pub fn experiment<'a>(&self, env: &'a Environment) -> Experiment<'a> {
        Experiment {
            env,
            policy: self.policy,
            horizon: self.horizon,
            trials: self.trials,
            base_seed: self.seed,
            log_every: self.log_every,
            timing: self.timing,
        }
    }

    pub fn build_environment(&self) -> Result<Environment, EnvError> {
        self.environment.build(&self.base_dir)
    }
}

impl RawConfig {
    fn validate(self, location: &str, base_dir: PathBuf) -> Result<RunConfig, ConfigError> {
        let invalid = |key: &str, message: String| ConfigError::Invalid {
            location: location.to_string(),
            key: key.to_string(),
            message,
        };
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1".into()));
        }
        let log_every = self.log_every.unwrap_or(DEFAULT_LOG_EVERY);
        if log_every == 0 {
            return Err(invalid("log_every", "must be at least 1".into()));
        }
        let policy = match self.policy {
            RawPolicy::EpsMats { epsilon, c, gate } => {
                let c = match c {
                    RawScale::Number(v) => v,
                    RawScale::Named(s) if s == "ln_T" => (self.horizon as f64).ln(),
                    RawScale::Named(s) => {
                        return Err(invalid(
                            "policy.c",
                            format!("expected a number or \"ln_T\", found \"{s}\""),
                        ))
                    }
                };
                let gate = match gate {
                    RawGate::PerArm => Gate::PerArm,
                    RawGate::PerRound => Gate::PerRound,
                };
                PolicyConfig::eps_mats(epsilon, c)
                    .map(|p| p.with_gate(gate))
                    .map_err(|e| match e {
                        PolicyError::Epsilon(_) => invalid("policy.epsilon", e.to_string()),
                        _ => invalid("policy.c", e.to_string()),
                    })?
            }
            RawPolicy::UcbBaseline { range } => PolicyConfig::ucb_baseline(range)
                .map_err(|e| invalid("policy.range", e.to_string()))?,
            RawPolicy::Random => PolicyConfig::Random,
        };
        self.environment
            .check()
            .map_err(|(key, message)| invalid(&format!("environment.{key}"), message))?;
        Ok(RunConfig {
            name: self.name,
            horizon: self.horizon,
            trials: self.trials,
            seed: self.seed,
            log_every,
            out: self.out,
            parallel: self.parallel,
            timing: self.timing,
            environment: self.environment,
            policy,
            base_dir,
        })
    }
}

impl EnvSpec {
    /// Cheap parameter checks that can name the offending key.
    fn check(&self) -> Result<(), (&'static str, String)> {
        match *self {
            EnvSpec::BernoulliChain { agents, group_size }
            | EnvSpec::PoissonChain { agents, group_size } => {
                if !(2..=3).contains(&group_size) {
                    return Err(("group_size", format!("must be 2 or 3, found {group_size}")));
                }
                if agents < group_size {
                    return Err((
                        "agents",
                        format!("must be at least group_size ({group_size})"),
                    ));
                }
            }
            EnvSpec::GemMining { villages, .. } => {
                if villages < 2 {
                    return Err(("villages", "must be at least 2".into()));
                }
            }
            EnvSpec::LowerBound { rho, x, delta, .. } => {
                if rho == 0 {
                    return Err(("rho", "must be at least 1".into()));
                }
                if x.is_nan() || x <= 3.0 {
                    return Err(("x", format!("must exceed 3, found {x}")));
                }
                if delta.is_nan() || delta <= 0.0 {
                    return Err(("delta", format!("must be positive, found {delta}")));
                }
            }
            EnvSpec::Table { .. } => {}
        }
        Ok(())
    }

    pub fn build(&self, base_dir: &Path) -> Result<Environment, EnvError> {
        match *self {
            EnvSpec::BernoulliChain { agents, group_size } => {
                env::chain_env(agents, group_size, ChainFamily::Bernoulli)
            }
            EnvSpec::PoissonChain { agents, group_size } => {
                env::chain_env(agents, group_size, ChainFamily::Poisson)
            }
            EnvSpec::GemMining { villages, env_seed } => {
                env::gem_mining_env(villages, &mut ChaCha8Rng::seed_from_u64(env_seed))
            }
            EnvSpec::LowerBound {
                rho,
                arms_per_agent,
                x,
                delta,
            } => env::lower_bound_env(
                rho,
                arms_per_agent.unwrap_or_else(|| env::lower_bound_arms(rho)),
                x,
                delta,
            ),
            EnvSpec::Table { ref path } => env::table_env(&base_dir.join(path)),
        }
    }
}

impl fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvSpec::BernoulliChain { agents, group_size } => {
                write!(
                    f,
                    "bernoulli_chain(agents={agents}, group_size={group_size})"
                )
            }
            EnvSpec::PoissonChain { agents, group_size } => {
                write!(f, "poisson_chain(agents={agents}, group_size={group_size})")
            }
            EnvSpec::GemMining { villages, env_seed } => {
                write!(f, "gem_mining(villages={villages}, env_seed={env_seed})")
            }
            EnvSpec::LowerBound {
                rho,
                arms_per_agent,
                x,
                delta,
            } => match arms_per_agent {
                Some(l) => write!(
                    f,
                    "lower_bound(rho={rho}, arms_per_agent={l}, x={x}, delta={delta})"
                ),
                None => write!(f, "lower_bound(rho={rho}, x={x}, delta={delta})"),
            },
            EnvSpec::Table { path } => write!(f, "table({})", path.display()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "bernoulli"
horizon = 10000
trials = 50
seed = 7
out = "out/bernoulli"

[environment]
kind = "bernoulli_chain"
agents = 10
group_size = 2

[policy]
kind = "eps_mats"
epsilon = 0.1
c = "ln_T"
"#;

    fn parse(text: &str, overrides: &[Override]) -> Result<RunConfig, ConfigError> {
        RunConfig::from_str_at(text, "test.toml", PathBuf::new(), overrides)
    }

    #[test]
    fn minimal_config_resolves_ln_t() {
        let cfg = parse(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.log_every, DEFAULT_LOG_EVERY);
        assert!(!cfg.timing);
        match cfg.policy {
            PolicyConfig::EpsMats { epsilon, c, gate } => {
                assert_eq!(epsilon, 0.1);
                assert!((c - 9.21034).abs() < 1e-5);
                assert_eq!(gate, Gate::PerArm);
            }
            other => panic!("unexpected policy {other:?}"),
        }
        let env = cfg.build_environment().unwrap();
        assert_eq!(env.graph().num_agents(), 10);
    }

    #[test]
    fn zero_epsilon_is_rejected() {
        let err = parse(MINIMAL, &[Override::new("policy.epsilon", 0.0)]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("policy.epsilon"), "{msg}");
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("epsilon = 0.1", "epsilonn = 0.1");
        let msg = parse(&text, &[]).unwrap_err().to_string();
        assert!(msg.contains("epsilonn"), "{msg}");
        assert!(msg.contains("test.toml"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn unknown_top_level_key_is_named() {
        let text = format!("colour = 1\n{MINIMAL}");
        let msg = parse(&text, &[]).unwrap_err().to_string();
        assert!(msg.contains("colour"), "{msg}");
    }

    #[test]
    fn missing_key_is_named() {
        let text = MINIMAL.replace("trials = 50\n", "");
        let msg = parse(&text, &[]).unwrap_err().to_string();
        assert!(msg.contains("trials"), "{msg}");
    }

    #[test]
    fn type_mismatch_is_reported() {
        let text = MINIMAL.replace("horizon = 10000", "horizon = \"long\"");
        let msg = parse(&text, &[]).unwrap_err().to_string();
        assert!(msg.contains("horizon") || msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn bad_scale_name() {
        let text = MINIMAL.replace("\"ln_T\"", "\"log\"");
        let msg = parse(&text, &[]).unwrap_err().to_string();
        assert!(msg.contains("policy.c"), "{msg}");
    }

    #[test]
    fn overrides_apply_before_validation() {
        let cfg = parse(
            MINIMAL,
            &[
                Override::parse("seed=99").unwrap(),
                Override::parse("policy.gate=per_round").unwrap(),
                Override::parse("environment.agents = 4").unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.seed, 99);
        assert!(matches!(
            cfg.policy,
            PolicyConfig::EpsMats {
                gate: Gate::PerRound,
                ..
            }
        ));
        assert_eq!(
            cfg.environment,
            EnvSpec::BernoulliChain {
                agents: 4,
                group_size: 2
            }
        );
    }

    #[test]
    fn malformed_override() {
        assert!(matches!(
            Override::parse("seed"),
            Err(ConfigError::Override(_))
        ));
        assert!(matches!(
            Override::parse("=3"),
            Err(ConfigError::Override(_))
        ));
    }

    #[test]
    fn environment_checks_name_keys() {
        let text = MINIMAL.replace("group_size = 2", "group_size = 5");
        let msg = parse(&text, &[]).unwrap_err().to_string();
        assert!(msg.contains("environment.group_size"), "{msg}");
    }

    #[test]
    fn other_kinds_parse() {
        let lb = MINIMAL
            .replace(
                "kind = \"bernoulli_chain\"\nagents = 10\ngroup_size = 2",
                "kind = \"lower_bound\"\nrho = 2\nx = 3.5\ndelta = 0.5",
            )
            .replace(
                "kind = \"eps_mats\"\nepsilon = 0.1\nc = \"ln_T\"",
                "kind = \"random\"",
            );
        let cfg = parse(&lb, &[]).unwrap();
        assert_eq!(cfg.policy, PolicyConfig::Random);
        let env = cfg.build_environment().unwrap();
        assert_eq!(env.graph().arm_counts(), &[67, 67]);

        let gem = MINIMAL.replace(
            "kind = \"bernoulli_chain\"\nagents = 10\ngroup_size = 2",
            "kind = \"gem_mining\"\nenv_seed = 3",
        );
        let a = parse(&gem, &[]).unwrap().build_environment().unwrap();
        let b = parse(&gem, &[]).unwrap().build_environment().unwrap();
        assert_eq!(a.means(), b.means());
        assert_eq!(a.graph().num_agents(), 5);
    }
}
