//! Reward-generating environments.
//!
//! An [`Environment`] is a hypergraph plus a true mean per local arm and a
//! reward law per group. The optimum over the allowed joint arms is computed
//! once at construction: by exhaustive search when the joint space has at most
//! 2^20 arms, by variable elimination otherwise.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::Deserialize;
use thiserror::Error;

use crate::actions::{ActionSet, Maximizer};
use crate::elimination::{brute_argmax, joint_score, DEFAULT_ORACLE_CAP};
use crate::hypergraph::{GraphError, Hypergraph, JointAssignment};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("expected {expected} means, got {got}")]
    MeansLength { expected: usize, got: usize },
    #[error("expected {expected} reward families, got {got}")]
    FamiliesLength { expected: usize, got: usize },
    #[error("local arm {local} has mean {mean}, invalid for a {family} reward")]
    InvalidMean {
        local: usize,
        mean: f64,
        family: RewardFamily,
    },
    #[error("chain needs 2 or 3 agents per group, got {0}")]
    ChainWindow(usize),
    #[error("chain of {agents} agents is shorter than its group size {window}")]
    ChainTooShort { agents: usize, window: usize },
    #[error("gem mining needs at least 2 villages, got {0}")]
    TooFewVillages(usize),
    #[error("invalid lower-bound instance: {0}")]
    LowerBound(String),
    #[error("action set is empty or contains arms outside the hypergraph")]
    ActionSet,
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing table environment: {0}")]
    Table(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardFamily {
    Bernoulli,
    Poisson,
    /// Unit variance.
    Gaussian,
}

impl std::fmt::Display for RewardFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RewardFamily::Bernoulli => "bernoulli",
            RewardFamily::Poisson => "poisson",
            RewardFamily::Gaussian => "gaussian",
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Sampler {
    Bernoulli(f64),
    Poisson(Poisson<f64>),
    Zero,
    Gaussian(f64),
}

#[derive(Debug, Clone)]
pub struct Environment {
    name: String,
    graph: Hypergraph,
    means: Vec<f64>,
    families: Vec<RewardFamily>,
    samplers: Vec<Sampler>,
    actions: ActionSet,
    optimal: JointAssignment,
    optimal_value: f64,
}

impl Environment {
    /// `means` is indexed by flat local arm, `families` by group.
    pub fn new(
        name: impl Into<String>,
        graph: Hypergraph,
        means: Vec<f64>,
        families: Vec<RewardFamily>,
        actions: ActionSet,
    ) -> Result<Self, EnvError> {
        if means.len() != graph.local_arm_count() {
            return Err(EnvError::MeansLength {
                expected: graph.local_arm_count(),
                got: means.len(),
            });
        }
        if families.len() != graph.num_groups() {
            return Err(EnvError::FamiliesLength {
                expected: graph.num_groups(),
                got: families.len(),
            });
        }
        let mut samplers = Vec::with_capacity(means.len());
        for (e, &family) in families.iter().enumerate() {
            for local in graph.group_range(e) {
                let mean = means[local];
                let bad = EnvError::InvalidMean {
                    local,
                    mean,
                    family,
                };
                samplers.push(match family {
                    RewardFamily::Bernoulli if (0.0..=1.0).contains(&mean) => {
                        Sampler::Bernoulli(mean)
                    }
                    RewardFamily::Poisson if mean == 0.0 => Sampler::Zero,
                    RewardFamily::Poisson if mean > 0.0 && mean.is_finite() => {
                        Sampler::Poisson(Poisson::new(mean).map_err(|_| bad)?)
                    }
                    RewardFamily::Gaussian if mean.is_finite() => Sampler::Gaussian(mean),
                    _ => return Err(bad),
                });
            }
        }
        let valid_set = match &actions {
            ActionSet::Explicit(list) => {
                !list.is_empty() && list.iter().all(|a| graph.check_assignment(a).is_ok())
            }
            ActionSet::AvoidOrMatch { optimal } => graph.check_assignment(optimal).is_ok(),
            ActionSet::Product => true,
        };
        if !valid_set {
            return Err(EnvError::ActionSet);
        }

        let (optimal, optimal_value) = match (&actions, graph.joint_count()) {
            (ActionSet::Product, Ok(n)) if n <= DEFAULT_ORACLE_CAP => {
                let r = brute_argmax(&graph, &means).expect("size checked against the cap");
                (r.argmax, r.value)
            }
            _ => {
                let c = Maximizer::new(&graph, actions.clone()).maximize(&graph, &means);
                (c.arm, c.value)
            }
        };

        Ok(Self {
            name: name.into(),
            graph,
            means,
            families,
            samplers,
            actions,
            optimal,
            optimal_value,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn graph(&self) -> &Hypergraph {
        &self.graph
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn families(&self) -> &[RewardFamily] {
        &self.families
    }

    pub fn action_set(&self) -> &ActionSet {
        &self.actions
    }

    pub fn optimal_arm(&self) -> &JointAssignment {
        &self.optimal
    }

    /// `mu*`, the largest joint mean over the allowed arms.
    pub fn optimal_value(&self) -> f64 {
        self.optimal_value
    }

    /// `mu_a = sum_e mu_{a^e}`.
    pub fn joint_mean(&self, a: &JointAssignment) -> f64 {
        joint_score(&self.graph, &self.means, a.arms())
    }

    /// Gap of means `mu* - mu_a`, never negative.
    pub fn pseudo_regret(&self, a: &JointAssignment) -> f64 {
        (self.optimal_value - self.joint_mean(a)).max(0.0)
    }

    /// One independent reward per group, ascending group order.
    pub fn sample_rewards<R: Rng + ?Sized>(
        &self,
        a: &JointAssignment,
        rng: &mut R,
        out: &mut Vec<f64>,
    ) {
        out.clear();
        for e in 0..self.graph.num_groups() {
            let j = self.graph.flat_local(a.arms(), e);
            out.push(draw(&self.samplers[j], rng));
        }
    }

    /// Every allowed joint arm with its gap, when there are at most `cap`.
    pub fn gap_table(&self, cap: usize) -> Option<Vec<(JointAssignment, f64)>> {
        let n = self.actions.count(&self.graph)?;
        if n > cap as u128 {
            return None;
        }
        Some(
            self.actions
                .enumerate(&self.graph)
                .into_iter()
                .map(|a| {
                    let g = self.pseudo_regret(&a);
                    (a, g)
                })
                .collect(),
        )
    }

    /// Mean gap of a uniformly random allowed arm, by enumeration.
    pub fn mean_gap(&self, cap: usize) -> Option<f64> {
        let table = self.gap_table(cap)?;
        Some(table.iter().map(|(_, g)| g).sum::<f64>() / table.len() as f64)
    }
}

fn draw<R: Rng + ?Sized>(s: &Sampler, rng: &mut R) -> f64 {
    match *s {
        Sampler::Bernoulli(p) => {
            let u: f64 = rng.random();
            if u < p {
                1.0
            } else {
                0.0
            }
        }
        Sampler::Poisson(ref d) => d.sample(rng),
        Sampler::Zero => 0.0,
        Sampler::Gaussian(mu) => {
            let z: f64 = rng.sample(StandardNormal);
            mu + z
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainFamily {
    Bernoulli,
    Poisson,
}

/// Two-agent table for even groups; odd groups use its transpose.
const BERNOULLI_PAIR: [[f64; 2]; 2] = [[0.75, 1.0], [0.25, 0.9]];
const POISSON_PAIR: [[f64; 2]; 2] = [[0.1, 0.3], [0.2, 0.1]];

/// Three-agent table indexed `[a_i][a_{i+1}][a_{i+2}]`.
const TRIPLE: [[[f64; 2]; 2]; 2] = [[[0.5, 0.2], [0.8, 0.4]], [[0.9, 0.3], [0.6, 1.0]]];

/// Mean of a local arm of chain group `e` (which starts at agent `e`).
fn chain_mean(window: usize, family: ChainFamily, e: usize, tuple: &[usize]) -> f64 {
    if window == 2 {
        let table = match family {
            ChainFamily::Bernoulli => &BERNOULLI_PAIR,
            ChainFamily::Poisson => &POISSON_PAIR,
        };
        let (x, y) = (tuple[0], tuple[1]);
        if e.is_multiple_of(2) {
            table[x][y]
        } else {
            table[y][x]
        }
    } else {
        // groups starting at 3c+1 / 3c+2 read the table through a left
        // rotation of the arm tuple by 1 / 2 positions
        let r = e % 3;
        let t = |k: usize| tuple[(k + r) % 3];
        TRIPLE[t(0)][t(1)][t(2)]
    }
}

/// 0101-chain: `m` agents with 2 arms each, groups of `window` consecutive agents.
pub fn chain_env(
    agents: usize,
    window: usize,
    family: ChainFamily,
) -> Result<Environment, EnvError> {
    if window != 2 && window != 3 {
        return Err(EnvError::ChainWindow(window));
    }
    if agents < window {
        return Err(EnvError::ChainTooShort { agents, window });
    }
    let graph = Hypergraph::chain(agents, 2, window)?;
    let means = (0..graph.num_groups())
        .flat_map(|e| {
            let graph = &graph;
            (0..graph.group_size(e))
                .map(move |w| chain_mean(window, family, e, &graph.decode_local(e, w)))
        })
        .collect();
    let reward = match family {
        ChainFamily::Bernoulli => RewardFamily::Bernoulli,
        ChainFamily::Poisson => RewardFamily::Poisson,
    };
    let families = vec![reward; graph.num_groups()];
    let name = format!(
        "{}_chain_m{agents}_d{window}",
        match family {
            ChainFamily::Bernoulli => "bernoulli",
            ChainFamily::Poisson => "poisson",
        }
    );
    Environment::new(name, graph, means, families, ActionSet::Product)
}

/// A generated Gem Mining instance. Villages are agents, mines are groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GemMining {
    /// Workers living in each village, in `1..=5`.
    pub workers: Vec<u32>,
    /// Number of consecutive mines each village reaches, starting at its own index.
    pub reach: Vec<usize>,
    /// Base gem probability of each mine, in `[0, 0.5)`.
    pub base_prob: Vec<f64>,
}

/// Success probability of a mine worked by `workers` people: `min(1, 1.03^(w-1) p)`,
/// and 0 for an empty mine.
pub fn gem_probability(base_prob: f64, workers: u32) -> f64 {
    if workers == 0 {
        return 0.0;
    }
    (1.03f64.powi(workers as i32 - 1) * base_prob).min(1.0)
}

impl GemMining {
    /// Draws, in order: workers per village, reach per village (the last
    /// village always reaches 4 mines and consumes no draw), base probability
    /// per mine.
    pub fn generate<R: Rng + ?Sized>(villages: usize, rng: &mut R) -> Result<Self, EnvError> {
        if villages < 2 {
            return Err(EnvError::TooFewVillages(villages));
        }
        let workers = (0..villages).map(|_| rng.random_range(1..=5)).collect();
        let reach: Vec<usize> = (0..villages)
            .map(|i| {
                if i + 1 == villages {
                    4
                } else {
                    rng.random_range(2..=4)
                }
            })
            .collect();
        let mines = reach
            .iter()
            .enumerate()
            .map(|(i, r)| i + r)
            .max()
            .unwrap_or(0);
        let base_prob = (0..mines).map(|_| rng.random_range(0.0..0.5)).collect();
        Ok(Self {
            workers,
            reach,
            base_prob,
        })
    }

    pub fn num_mines(&self) -> usize {
        self.base_prob.len()
    }

    /// Villages able to reach `mine`, ascending.
    pub fn villages_of(&self, mine: usize) -> Vec<usize> {
        (0..self.workers.len())
            .filter(|&i| i <= mine && mine < i + self.reach[i])
            .collect()
    }

    pub fn environment(&self) -> Result<Environment, EnvError> {
        let villages = self.workers.len();
        let mines: Vec<(usize, Vec<usize>)> = (0..self.num_mines())
            .map(|j| (j, self.villages_of(j)))
            .filter(|(_, members)| !members.is_empty())
            .collect();
        let groups: Vec<Vec<usize>> = mines.iter().map(|(_, m)| m.clone()).collect();
        let graph = Hypergraph::new(villages, self.reach.clone(), groups)?;

        let mut means = Vec::with_capacity(graph.local_arm_count());
        for (e, (mine, members)) in mines.iter().enumerate() {
            for w in 0..graph.group_size(e) {
                let tuple = graph.decode_local(e, w);
                let staff: u32 = members
                    .iter()
                    .zip(&tuple)
                    .filter(|&(&v, &arm)| v + arm == *mine)
                    .map(|(&v, _)| self.workers[v])
                    .sum();
                means.push(gem_probability(self.base_prob[*mine], staff));
            }
        }
        let families = vec![RewardFamily::Bernoulli; graph.num_groups()];
        Environment::new(
            format!("gem_mining_v{villages}"),
            graph,
            means,
            families,
            ActionSet::Product,
        )
    }
}

pub fn gem_mining_env<R: Rng + ?Sized>(
    villages: usize,
    rng: &mut R,
) -> Result<Environment, EnvError> {
    GemMining::generate(villages, rng)?.environment()
}

/// Standard normal CDF at 1.
const PHI_ONE: f64 = 0.841_344_746_068_542_9;

/// Number of mean-`X` local arms per group used by the adversarial
/// construction: `ceil(2e rho log_{1/b} 2 + 2e log_{1/b} rho)` with `b = Phi(1)`.
pub fn lower_bound_arms(rho: usize) -> usize {
    let log_b = |x: f64| x.ln() / (1.0 / PHI_ONE).ln();
    let e = std::f64::consts::E;
    let rho = rho as f64;
    (2.0 * e * rho * log_b(2.0) + 2.0 * e * log_b(rho)).ceil() as usize
}

/// Adversarial instance: `rho` single-agent groups, each with `l` arms of mean
/// `x` (indices `0..l`) and one arm of mean `x + delta` (index `l`). Only the
/// `l^rho` all-suboptimal joint arms and the all-optimal joint arm are allowed.
/// Rewards are unit-variance Gaussian.
pub fn lower_bound_env(rho: usize, l: usize, x: f64, delta: f64) -> Result<Environment, EnvError> {
    if rho == 0 {
        return Err(EnvError::LowerBound("rho must be at least 1".into()));
    }
    if !(x > 3.0 && x.is_finite()) {
        return Err(EnvError::LowerBound(format!("X must exceed 3, got {x}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(EnvError::LowerBound(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let graph = Hypergraph::uniform(rho, l + 1, (0..rho).map(|i| vec![i]).collect())?;
    let means = (0..rho)
        .flat_map(|_| (0..=l).map(|k| if k == l { x + delta } else { x }))
        .collect();
    Environment::new(
        format!("lower_bound_rho{rho}_l{l}"),
        graph,
        means,
        vec![RewardFamily::Gaussian; rho],
        ActionSet::AvoidOrMatch {
            optimal: JointAssignment::new(vec![l; rho]),
        },
    )
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    name: Option<String>,
    graph: TableGraph,
    means: TableMeans,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableGraph {
    arm_counts: Vec<usize>,
    groups: Vec<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableMeans {
    families: Vec<RewardFamily>,
    values: Vec<f64>,
}

/// Parses a table environment. See `configs/tables/` for the format.
pub fn table_env_from_str(text: &str) -> Result<Environment, EnvError> {
    let file: TableFile = toml::from_str(text)?;
    let n = file.graph.arm_counts.len();
    let graph = Hypergraph::new(n, file.graph.arm_counts, file.graph.groups)?;
    Environment::new(
        file.name.unwrap_or_else(|| "table".to_string()),
        graph,
        file.means.values,
        file.means.families,
        ActionSet::Product,
    )
}

pub fn table_env(path: &Path) -> Result<Environment, EnvError> {
    let text = std::fs::read_to_string(path).map_err(|source| EnvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    table_env_from_str(&text)
}
