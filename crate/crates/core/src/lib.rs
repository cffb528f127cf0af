//! Multi-agent multi-armed bandits on coordination hypergraphs.
//!
//! Agents pick individual arms; groups of agents (hyperedges) each emit a
//! local reward depending only on their members' arms, and the team reward is
//! the sum. The crate provides:
//!
//! * [`hypergraph`]: agents, groups, and local/joint arm indexing.
//! * [`elimination`]: max-sum variable elimination with a brute-force oracle.
//! * [`actions`]: full and restricted joint action sets.
//! * [`policy`]: epsilon-exploring multi-agent Thompson sampling, a UCB-style
//!   baseline, and uniform random play.
//! * [`env`]: 0101-chains, Gem Mining, an adversarial lower-bound instance and
//!   table-driven environments.
//! * [`harness`]: seeded trials, regret traces and summaries.
//! * [`cli`]: config parsing, CSV output and SVG plots for the `mamab` binary.

pub mod actions;
pub mod cli;
pub mod elimination;
pub mod env;
pub mod harness;
pub mod hypergraph;
pub mod policy;

pub use actions::ActionSet;
pub use elimination::{brute_argmax, ve_argmax, EliminationPlan, EliminationResult};
pub use env::{Environment, RewardFamily};
pub use harness::{
    first_optimal_pull, run_experiment, run_trial, Checkpoint, Execution, Experiment,
    ExperimentResult, ExperimentSummary, RegretTrace, SummaryRow,
};
pub use hypergraph::{Hypergraph, JointAssignment, LocalArmIndex};
pub use policy::{Learner, LocalArmStats, PolicyConfig};
