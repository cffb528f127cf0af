//! Joint-arm maximization over a sum of per-group score tables.
//!
//! [`EliminationPlan`] runs max-sum variable elimination with a fixed order:
//! the highest agent index is eliminated first. Eliminating agent `i` merges
//! every pending factor that mentions `i` (original group tables and messages
//! left behind by earlier eliminations) into one table over `i` plus the
//! not-yet-eliminated agents those factors touch, then maximizes `i` out while
//! recording the best arm of `i` for each context. Backtracking from agent 0
//! upwards recovers the assignment.
//!
//! Ties are broken towards the smallest mixed-radix joint index: backtracking
//! assigns agent 0 (the most significant digit) first and always takes the
//! smallest maximizing arm, which selects the lexicographically smallest
//! maximizer.
//!
//! [`brute_argmax`] enumerates the whole joint space and exists to check the
//! elimination path.

use thiserror::Error;

use crate::hypergraph::{GraphError, Hypergraph, JointAssignment};

/// Largest joint space [`brute_argmax`] accepts by default.
pub const DEFAULT_ORACLE_CAP: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EliminationError {
    #[error("score vector has length {got}, hypergraph has {expected} local arms")]
    ScoreLength { expected: usize, got: usize },
    #[error("joint space of {size} arms exceeds the brute-force cap {cap}")]
    OracleCap { size: usize, cap: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EliminationResult {
    pub argmax: JointAssignment,
    pub value: f64,
    /// Number of factor-table cells read while maximizing.
    pub op_count: u64,
}

/// Sum of `scores` over the local arms selected by `arms`, in ascending group order.
pub fn joint_score(h: &Hypergraph, scores: &[f64], arms: &[usize]) -> f64 {
    (0..h.num_groups())
        .map(|e| scores[h.flat_local(arms, e)])
        .sum()
}

#[derive(Debug, Clone, Copy)]
enum Source {
    Group(usize),
    Message(usize),
}

#[derive(Debug, Clone)]
struct Component {
    /// Start of this component's table in the workspace buffer.
    offset: usize,
    /// Stride of each context agent in this component's table (0 if absent).
    ctx_strides: Vec<usize>,
    /// Stride of the eliminated agent.
    agent_stride: usize,
}

#[derive(Debug, Clone)]
struct Step {
    arms: usize,
    /// Remaining agents of the merged factor, ascending; first is most significant.
    context: Vec<usize>,
    context_radix: Vec<usize>,
    context_len: usize,
    components: Vec<Component>,
}

/// Precomputed elimination schedule for one hypergraph. Reusable across score
/// vectors; per-call scratch space lives in a [`Workspace`].
#[derive(Debug, Clone)]
pub struct EliminationPlan {
    num_agents: usize,
    num_local: usize,
    steps: Vec<Step>,
    /// Start of each step's message in the workspace buffer, which holds the
    /// scores first and then every message in step order.
    message_offsets: Vec<usize>,
    buffer_len: usize,
    /// Index into `steps` for each agent.
    step_of_agent: Vec<usize>,
    ops_per_call: u64,
}

impl EliminationPlan {
    pub fn new(h: &Hypergraph) -> Self {
        let m = h.num_agents();
        let counts = h.arm_counts();

        // Pending factors keyed by the highest agent they mention; that agent
        // is the next one in the order to touch them.
        let mut pending: Vec<Vec<(Source, Vec<usize>)>> = vec![Vec::new(); m];
        for (e, members) in h.groups().iter().enumerate() {
            let top = *members.iter().max().expect("groups are non-empty");
            pending[top].push((Source::Group(e), members.clone()));
        }

        let mut steps = Vec::with_capacity(m);
        let mut message_offsets: Vec<usize> = Vec::with_capacity(m);
        let mut buffer_len = h.local_arm_count();
        let mut step_of_agent = vec![0; m];
        let mut ops_per_call = 0u64;
        for agent in (0..m).rev() {
            let factors = std::mem::take(&mut pending[agent]);
            let mut context: Vec<usize> = factors
                .iter()
                .flat_map(|(_, scope)| scope.iter().copied())
                .filter(|&j| j != agent)
                .collect();
            context.sort_unstable();
            context.dedup();

            let components = factors
                .iter()
                .map(|(source, scope)| {
                    let stride_of = |target: usize| -> usize {
                        let mut stride = 1;
                        for &j in scope.iter().rev() {
                            if j == target {
                                return stride;
                            }
                            stride *= counts[j];
                        }
                        0
                    };
                    Component {
                        offset: match *source {
                            Source::Group(e) => h.local_offsets()[e],
                            Source::Message(k) => message_offsets[k],
                        },
                        ctx_strides: context.iter().map(|&j| stride_of(j)).collect(),
                        agent_stride: stride_of(agent),
                    }
                })
                .collect::<Vec<_>>();

            let context_radix: Vec<usize> = context.iter().map(|&j| counts[j]).collect();
            let context_len: usize = context_radix.iter().product();
            ops_per_call += (context_len * counts[agent] * components.len()) as u64;

            let step_idx = steps.len();
            step_of_agent[agent] = step_idx;
            message_offsets.push(buffer_len);
            buffer_len += context_len;
            if let Some(&top) = context.last() {
                pending[top].push((Source::Message(step_idx), context.clone()));
            }
            steps.push(Step {
                arms: counts[agent],
                context,
                context_radix,
                context_len,
                components,
            });
        }

        Self {
            num_agents: m,
            num_local: h.local_arm_count(),
            steps,
            message_offsets,
            buffer_len,
            step_of_agent,
            ops_per_call,
        }
    }

    /// Table-cell reads performed by every call to [`EliminationPlan::argmax`].
    pub fn ops_per_call(&self) -> u64 {
        self.ops_per_call
    }

    /// Largest merged table built by the schedule, in cells.
    pub fn max_merged_cells(&self) -> usize {
        self.steps
            .iter()
            .map(|s| s.context_len * s.arms)
            .max()
            .unwrap_or(0)
    }

    /// Scratch buffers sized for this plan.
    pub fn workspace(&self) -> Workspace {
        Workspace {
            tables: vec![0.0; self.buffer_len],
            choices: vec![0; self.buffer_len - self.num_local],
            digits: Vec::new(),
            bases: Vec::new(),
            arms: vec![0; self.num_agents],
        }
    }

    /// Maximizing joint arm and its op count. The returned value is
    /// recomputed from `scores` by [`joint_score`].
    pub fn argmax(
        &self,
        h: &Hypergraph,
        scores: &[f64],
    ) -> Result<EliminationResult, EliminationError> {
        self.argmax_with(h, scores, &mut self.workspace())
    }

    /// Same as [`EliminationPlan::argmax`], reusing `ws` (from [`EliminationPlan::workspace`]).
    pub fn argmax_with(
        &self,
        h: &Hypergraph,
        scores: &[f64],
        ws: &mut Workspace,
    ) -> Result<EliminationResult, EliminationError> {
        if scores.len() != self.num_local {
            return Err(EliminationError::ScoreLength {
                expected: self.num_local,
                got: scores.len(),
            });
        }

        let Workspace {
            tables,
            choices,
            digits,
            bases,
            arms,
        } = ws;
        tables[..self.num_local].copy_from_slice(scores);

        for (s, step) in self.steps.iter().enumerate() {
            let out_at = self.message_offsets[s];
            // components only read tables stored before this step's message
            let (read, write) = tables.split_at_mut(out_at);
            let msg = &mut write[..step.context_len];
            let best_arm = &mut choices[out_at - self.num_local..][..step.context_len];

            digits.clear();
            digits.resize(step.context.len(), 0usize);
            bases.clear();
            bases.extend(step.components.iter().map(|c| c.offset));

            for cell in 0..step.context_len {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for arm in 0..step.arms {
                    let mut v = 0.0;
                    for (comp, &base) in step.components.iter().zip(bases.iter()) {
                        v += read[base + arm * comp.agent_stride];
                    }
                    if v > best {
                        best = v;
                        arg = arm;
                    }
                }
                msg[cell] = best;
                best_arm[cell] = arg;

                // advance the context odometer, last digit fastest
                for pos in (0..digits.len()).rev() {
                    digits[pos] += 1;
                    for (comp, base) in step.components.iter().zip(bases.iter_mut()) {
                        *base += comp.ctx_strides[pos];
                    }
                    if digits[pos] < step.context_radix[pos] {
                        break;
                    }
                    for (comp, base) in step.components.iter().zip(bases.iter_mut()) {
                        *base -= comp.ctx_strides[pos] * digits[pos];
                    }
                    digits[pos] = 0;
                }
            }
        }

        for agent in 0..self.num_agents {
            let s = self.step_of_agent[agent];
            let step = &self.steps[s];
            let cell = step
                .context
                .iter()
                .zip(&step.context_radix)
                .fold(0, |acc, (&j, &k)| acc * k + arms[j]);
            arms[agent] = choices[self.message_offsets[s] - self.num_local + cell];
        }

        let value = joint_score(h, scores, arms);
        Ok(EliminationResult {
            argmax: JointAssignment::new(arms.clone()),
            value,
            op_count: self.ops_per_call,
        })
    }
}

/// Reusable buffers for [`EliminationPlan::argmax_with`].
#[derive(Debug, Clone)]
pub struct Workspace {
    tables: Vec<f64>,
    choices: Vec<usize>,
    digits: Vec<usize>,
    bases: Vec<usize>,
    arms: Vec<usize>,
}

/// One-shot variable elimination; builds a fresh plan.
pub fn ve_argmax(h: &Hypergraph, scores: &[f64]) -> Result<EliminationResult, EliminationError> {
    EliminationPlan::new(h).argmax(h, scores)
}

/// Exhaustive argmax with the default cap.
pub fn brute_argmax(h: &Hypergraph, scores: &[f64]) -> Result<EliminationResult, EliminationError> {
    brute_argmax_capped(h, scores, DEFAULT_ORACLE_CAP)
}

/// Exhaustive argmax over every joint arm; first maximizer in mixed-radix
/// order wins.
pub fn brute_argmax_capped(
    h: &Hypergraph,
    scores: &[f64],
    cap: usize,
) -> Result<EliminationResult, EliminationError> {
    if scores.len() != h.local_arm_count() {
        return Err(EliminationError::ScoreLength {
            expected: h.local_arm_count(),
            got: scores.len(),
        });
    }
    let size = h.joint_count()?;
    if size > cap {
        return Err(EliminationError::OracleCap { size, cap });
    }
    let mut best: Option<(JointAssignment, f64)> = None;
    let mut ops = 0u64;
    for a in h.enumerate_joint()? {
        let v = joint_score(h, scores, a.arms());
        ops += h.num_groups() as u64;
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((a, v));
        }
    }
    let (argmax, value) = best.expect("joint space is never empty");
    Ok(EliminationResult {
        argmax,
        value,
        op_count: ops,
    })
}
