//! Decision-making policies over local-arm statistics.
//!
//! * `EpsMats`: each round, every local arm independently draws a Gaussian
//!   posterior sample `N(mu_hat, c / (n + 1))` with probability `epsilon` and
//!   otherwise uses its empirical mean. The joint arm maximizing the summed
//!   scores is pulled. `epsilon = 1` is plain multi-agent Thompson sampling.
//! * `UcbBaseline`: an optimistic index per local arm, maximized the same way.
//!   This is a simple UCB-style comparator, not a reimplementation of any
//!   published multi-agent UCB method.
//! * `Random`: uniform over the allowed joint arms.
//!
//! By default the epsilon gate is drawn independently for every local arm
//! ([`Gate::PerArm`]). [`Gate::PerRound`] instead draws one gate per round and,
//! when it opens, samples every local arm.
//!
//! Random draws are taken from the caller's stream in a fixed order, given
//! for the per-arm gate in [`sample_scores`]. Per-round: the gate draw, then (if it opens)
//! one Gaussian draw per local arm ascending.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::actions::{ActionSet, Maximizer};
use crate::hypergraph::{Hypergraph, JointAssignment};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("epsilon must lie in (0, 1], got {0}")]
    Epsilon(f64),
    #[error("posterior scale c must be finite and > 0, got {0}")]
    Scale(f64),
    #[error("ucb range must be finite and > 0, got {0}")]
    Range(f64),
    #[error("expected {expected} group rewards, got {got}")]
    RewardLength { expected: usize, got: usize },
}

/// How the epsilon coin is tossed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gate {
    /// One coin per local arm per round.
    #[default]
    PerArm,
    /// One coin per round shared by all local arms.
    PerRound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyConfig {
    EpsMats { epsilon: f64, c: f64, gate: Gate },
    UcbBaseline { range: f64 },
    Random,
}

impl PolicyConfig {
    pub fn eps_mats(epsilon: f64, c: f64) -> Result<Self, PolicyError> {
        let cfg = PolicyConfig::EpsMats {
            epsilon,
            c,
            gate: Gate::PerArm,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replaces the gate of an `EpsMats` config; other kinds are returned unchanged.
    pub fn with_gate(self, gate: Gate) -> Self {
        match self {
            PolicyConfig::EpsMats { epsilon, c, .. } => PolicyConfig::EpsMats { epsilon, c, gate },
            other => other,
        }
    }

    /// `epsilon = 1`.
    pub fn mats(c: f64) -> Result<Self, PolicyError> {
        Self::eps_mats(1.0, c)
    }

    pub fn ucb_baseline(range: f64) -> Result<Self, PolicyError> {
        let cfg = PolicyConfig::UcbBaseline { range };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        match *self {
            PolicyConfig::EpsMats { epsilon, c, .. } => {
                if !(epsilon > 0.0 && epsilon <= 1.0) {
                    return Err(PolicyError::Epsilon(epsilon));
                }
                if !(c.is_finite() && c > 0.0) {
                    return Err(PolicyError::Scale(c));
                }
            }
            PolicyConfig::UcbBaseline { range } => {
                if !(range.is_finite() && range > 0.0) {
                    return Err(PolicyError::Range(range));
                }
            }
            PolicyConfig::Random => {}
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicyConfig::EpsMats { .. } => "eps_mats",
            PolicyConfig::UcbBaseline { .. } => "ucb_baseline",
            PolicyConfig::Random => "random",
        }
    }
}

/// Pull counts and empirical means per flat local arm.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalArmStats {
    pub n: Vec<u64>,
    pub mu_hat: Vec<f64>,
}

impl LocalArmStats {
    pub fn new(num_local: usize) -> Self {
        Self {
            n: vec![0; num_local],
            mu_hat: vec![0.0; num_local],
        }
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    /// Incremental mean update of the local arm each group pulled under `a`.
    pub fn update(
        &mut self,
        h: &Hypergraph,
        a: &JointAssignment,
        rewards: &[f64],
    ) -> Result<(), PolicyError> {
        if rewards.len() != h.num_groups() {
            return Err(PolicyError::RewardLength {
                expected: h.num_groups(),
                got: rewards.len(),
            });
        }
        for (e, &r) in rewards.iter().enumerate() {
            let j = h.flat_local(a.arms(), e);
            let n = self.n[j] as f64;
            self.mu_hat[j] = (n * self.mu_hat[j] + r) / (n + 1.0);
            self.n[j] += 1;
        }
        Ok(())
    }
}

/// Below this epsilon, open gates are found by skipping ahead rather than by
/// drawing one gate per local arm.
pub const SKIP_GATES_BELOW: f64 = 0.125;

/// Fills `out` with epsilon-gated posterior samples and returns how many
/// Gaussian draws were taken. `epsilon = 0` gives the greedy scores.
///
/// Each local arm's gate opens independently with probability `epsilon`.
/// For `epsilon >= SKIP_GATES_BELOW` all gates are drawn first (local arms
/// ascending), then one Gaussian per open gate (ascending). For smaller
/// `epsilon` the gap to the next open gate is drawn by geometric inversion,
/// each gap followed by that arm's Gaussian, so a round costs
/// `O(epsilon * A_loc)` draws instead of `O(A_loc)`.
pub fn sample_scores<R: Rng + ?Sized>(
    stats: &LocalArmStats,
    epsilon: f64,
    c: f64,
    rng: &mut R,
    out: &mut [f64],
) -> u64 {
    thread_local! {
        static OPEN: std::cell::RefCell<Vec<usize>> = const { std::cell::RefCell::new(Vec::new()) };
    }
    out.copy_from_slice(&stats.mu_hat);
    let mut perturb = |j: usize, rng: &mut R| {
        let z: f64 = rng.sample(StandardNormal);
        out[j] += (c / (stats.n[j] as f64 + 1.0)).sqrt() * z;
    };
    if epsilon <= 0.0 {
        return 0;
    }
    let n = stats.len();
    if epsilon < SKIP_GATES_BELOW {
        let log_closed = (-epsilon).ln_1p();
        let mut count = 0;
        let mut j = 0;
        loop {
            let u: f64 = rng.random();
            // closed gates before the next open one, Geometric(epsilon)
            let skip = ((1.0 - u).ln() / log_closed).floor();
            if skip >= (n - j) as f64 {
                return count;
            }
            j += skip as usize;
            perturb(j, rng);
            count += 1;
            j += 1;
        }
    }
    OPEN.with_borrow_mut(|open| {
        open.clear();
        open.resize(n, 0);
        let mut count = 0;
        for j in 0..n {
            let gate: f64 = rng.random();
            open[count] = j;
            count += (gate < epsilon) as usize;
        }
        for &j in &open[..count] {
            perturb(j, rng);
        }
        count as u64
    })
}

/// Per-round variant of [`sample_scores`]: one gate for all local arms.
pub fn sample_scores_per_round<R: Rng + ?Sized>(
    stats: &LocalArmStats,
    epsilon: f64,
    c: f64,
    rng: &mut R,
    out: &mut [f64],
) -> u64 {
    let gate: f64 = rng.random();
    if gate < epsilon {
        for ((slot, &mu), &n) in out.iter_mut().zip(&stats.mu_hat).zip(&stats.n) {
            let z: f64 = rng.sample(StandardNormal);
            *slot = mu + (c / (n as f64 + 1.0)).sqrt() * z;
        }
        out.len() as u64
    } else {
        out.copy_from_slice(&stats.mu_hat);
        0
    }
}

/// `mu_hat + range * sqrt(ln(t * A_loc) / (2 (n + 1)))` per local arm.
pub fn ucb_scores(stats: &LocalArmStats, t: u64, range: f64, out: &mut [f64]) {
    let log_term = ((t as f64) * (stats.len() as f64)).ln().max(0.0);
    for ((slot, &mu), &n) in out.iter_mut().zip(&stats.mu_hat).zip(&stats.n) {
        *slot = mu + range * (log_term / (2.0 * (n as f64 + 1.0))).sqrt();
    }
}

/// A policy together with its per-trial state.
#[derive(Debug, Clone)]
pub struct Learner {
    cfg: PolicyConfig,
    stats: LocalArmStats,
    maximizer: Maximizer,
    scores: Vec<f64>,
    gaussian_draws: u64,
    ve_ops: u64,
}

impl Learner {
    pub fn new(h: &Hypergraph, actions: ActionSet, cfg: PolicyConfig) -> Self {
        let n = h.local_arm_count();
        Self {
            cfg,
            stats: LocalArmStats::new(n),
            maximizer: Maximizer::new(h, actions),
            scores: vec![0.0; n],
            gaussian_draws: 0,
            ve_ops: 0,
        }
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &LocalArmStats {
        &self.stats
    }

    pub fn gaussian_draws(&self) -> u64 {
        self.gaussian_draws
    }

    pub fn ve_ops(&self) -> u64 {
        self.ve_ops
    }

    /// Scores used in the most recent [`Learner::select`] call.
    pub fn last_scores(&self) -> &[f64] {
        &self.scores
    }

    /// Chooses the joint arm for round `t` (1-based).
    pub fn select<R: Rng + ?Sized>(
        &mut self,
        h: &Hypergraph,
        t: u64,
        rng: &mut R,
    ) -> JointAssignment {
        match self.cfg {
            PolicyConfig::EpsMats { epsilon, c, gate } => {
                let sample = match gate {
                    Gate::PerArm => sample_scores::<R>,
                    Gate::PerRound => sample_scores_per_round::<R>,
                };
                self.gaussian_draws += sample(&self.stats, epsilon, c, rng, &mut self.scores);
            }
            PolicyConfig::UcbBaseline { range } => {
                ucb_scores(&self.stats, t, range, &mut self.scores);
            }
            PolicyConfig::Random => {
                return self.maximizer.action_set().sample_uniform(h, rng);
            }
        }
        let choice = self.maximizer.maximize(h, &self.scores);
        self.ve_ops += choice.ops;
        choice.arm
    }

    pub fn observe(
        &mut self,
        h: &Hypergraph,
        a: &JointAssignment,
        rewards: &[f64],
    ) -> Result<(), PolicyError> {
        self.stats.update(h, a, rewards)
    }
}
