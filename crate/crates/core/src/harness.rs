//! Seeded regret trials and their aggregation.
//!
//! A trial owns one ChaCha8 stream seeded from its trial seed. Each round
//! consumes the policy's draws first, then the environment's reward draws.
//! Trial `i` of an experiment uses seed `base_seed + i`, so trials can run in
//! any order or in parallel without changing a single output value.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::env::Environment;
use crate::policy::{Learner, PolicyConfig};

/// State of a trial after round `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub t: u64,
    /// Cumulative pseudo-regret.
    pub regret: f64,
    /// Cumulative Gaussian draws.
    pub gaussian_draws: u64,
    /// Loop time so far; 0 unless timing was requested.
    pub wall_ns: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub trial_seed: u64,
    pub checkpoints: Vec<Checkpoint>,
    pub gaussian_draws: u64,
    pub ve_ops: u64,
    pub wall_ns: u64,
    /// First round whose pulled arm was the environment's optimum.
    pub first_optimal: Option<u64>,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |c| c.regret)
    }

    /// Cumulative regret at checkpoint `t`, if it was logged.
    pub fn regret_at(&self, t: u64) -> Option<f64> {
        self.checkpoints
            .binary_search_by_key(&t, |c| c.t)
            .ok()
            .map(|k| self.checkpoints[k].regret)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub t: u64,
    pub mean: f64,
    pub std: f64,
    pub mean_wall_ns: f64,
    pub mean_gaussian_draws: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub trials: usize,
    pub rows: Vec<SummaryRow>,
    pub mean_wall_ns: f64,
    pub mean_gaussian_draws: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub summary: ExperimentSummary,
    pub traces: Vec<RegretTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Sequential,
    Parallel,
}

/// What to run: one policy on one environment, many seeded trials.
#[derive(Debug, Clone)]
pub struct Experiment<'a> {
    pub env: &'a Environment,
    pub policy: PolicyConfig,
    pub horizon: u64,
    pub trials: usize,
    pub base_seed: u64,
    pub log_every: u64,
    /// Record wall-clock time. Off by default so that every output value is a
    /// function of the seed alone.
    pub timing: bool,
}

/// Runs one trial of `horizon` rounds. Checkpoints fall on multiples of
/// `log_every` and on the last round. Wall time is always measured.
pub fn run_trial(
    env: &Environment,
    policy: PolicyConfig,
    horizon: u64,
    seed: u64,
    log_every: u64,
) -> RegretTrace {
    run_trial_until(env, policy, horizon, seed, log_every, false)
}

fn run_trial_untimed(
    env: &Environment,
    policy: PolicyConfig,
    horizon: u64,
    seed: u64,
    log_every: u64,
) -> RegretTrace {
    let mut tr = run_trial_until(env, policy, horizon, seed, log_every, false);
    tr.wall_ns = 0;
    for c in &mut tr.checkpoints {
        c.wall_ns = 0;
    }
    tr
}

fn run_trial_until(
    env: &Environment,
    policy: PolicyConfig,
    horizon: u64,
    seed: u64,
    log_every: u64,
    stop_at_optimum: bool,
) -> RegretTrace {
    assert!(
        horizon >= 1 && log_every >= 1,
        "horizon and log_every must be positive"
    );
    let h = env.graph();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut learner = Learner::new(h, env.action_set().clone(), policy);
    let mut rewards = Vec::with_capacity(h.num_groups());
    let mut checkpoints = Vec::with_capacity((horizon / log_every) as usize + 1);
    let mut cumulative = 0.0;
    let mut first_optimal = None;

    let start = Instant::now();
    for t in 1..=horizon {
        let a = learner.select(h, t, &mut rng);
        env.sample_rewards(&a, &mut rng, &mut rewards);
        learner
            .observe(h, &a, &rewards)
            .expect("one reward per group");
        cumulative += env.pseudo_regret(&a);
        if first_optimal.is_none() && &a == env.optimal_arm() {
            first_optimal = Some(t);
        }
        if t % log_every == 0 || t == horizon {
            checkpoints.push(Checkpoint {
                t,
                regret: cumulative,
                gaussian_draws: learner.gaussian_draws(),
                wall_ns: start.elapsed().as_nanos() as u64,
            });
        }
        if stop_at_optimum && first_optimal.is_some() {
            break;
        }
    }
    let wall_ns = start.elapsed().as_nanos() as u64;

    RegretTrace {
        trial_seed: seed,
        checkpoints,
        gaussian_draws: learner.gaussian_draws(),
        ve_ops: learner.ve_ops(),
        wall_ns,
        first_optimal,
    }
}

/// Round at which the optimum is first pulled, or `None` within `horizon`.
/// Stops as soon as it is found.
pub fn first_optimal_pull(
    env: &Environment,
    policy: PolicyConfig,
    horizon: u64,
    seed: u64,
) -> Option<u64> {
    run_trial_until(env, policy, horizon, seed, horizon, true).first_optimal
}

pub fn run_experiment(exp: &Experiment<'_>, execution: Execution) -> ExperimentResult {
    let trial = if exp.timing {
        run_trial
    } else {
        run_trial_untimed
    };
    let run = |i: usize| {
        trial(
            exp.env,
            exp.policy,
            exp.horizon,
            exp.base_seed.wrapping_add(i as u64),
            exp.log_every,
        )
    };
    let traces: Vec<RegretTrace> = match execution {
        Execution::Sequential => (0..exp.trials).map(run).collect(),
        Execution::Parallel => (0..exp.trials).into_par_iter().map(run).collect(),
    };
    ExperimentResult {
        summary: summarize(&traces),
        traces,
    }
}

/// Per-checkpoint mean and sample standard deviation across traces, which
/// must share their checkpoint grid. Accumulates in trace order.
pub fn summarize(traces: &[RegretTrace]) -> ExperimentSummary {
    let n = traces.len();
    let Some(first) = traces.first() else {
        return ExperimentSummary {
            trials: 0,
            rows: Vec::new(),
            mean_wall_ns: 0.0,
            mean_gaussian_draws: 0.0,
        };
    };
    let rows = first
        .checkpoints
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let values: Vec<f64> = traces.iter().map(|tr| tr.checkpoints[k].regret).collect();
            let (mean, std) = mean_std(&values);
            let avg = |f: fn(&Checkpoint) -> u64| {
                traces
                    .iter()
                    .map(|tr| f(&tr.checkpoints[k]) as f64)
                    .sum::<f64>()
                    / n as f64
            };
            SummaryRow {
                t: c.t,
                mean,
                std,
                mean_wall_ns: avg(|c| c.wall_ns),
                mean_gaussian_draws: avg(|c| c.gaussian_draws),
            }
        })
        .collect();
    let mean_wall_ns = traces.iter().map(|t| t.wall_ns as f64).sum::<f64>() / n as f64;
    let mean_gaussian_draws =
        traces.iter().map(|t| t.gaussian_draws as f64).sum::<f64>() / n as f64;
    ExperimentSummary {
        trials: n,
        rows,
        mean_wall_ns,
        mean_gaussian_draws,
    }
}

/// Mean and sample standard deviation; the deviation of one value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}
