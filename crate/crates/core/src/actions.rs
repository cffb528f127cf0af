//! Which joint arms a policy may pull.
//!
//! Most environments allow the full product space. The adversarial
//! lower-bound instance only allows the joint arms whose agents all avoid their
//! optimal arm, plus the single all-optimal joint arm; that set is not a
//! product space, so maximization over it is handled here.

use rand::Rng;

use crate::elimination::{joint_score, EliminationPlan, Workspace};
use crate::hypergraph::{Hypergraph, JointAssignment};

#[derive(Debug, Clone, PartialEq)]
pub enum ActionSet {
    /// Every joint arm.
    Product,
    /// An explicit candidate list; ties go to the smallest joint index.
    Explicit(Vec<JointAssignment>),
    /// Joint arms where every agent avoids its arm in `optimal`, plus `optimal`.
    AvoidOrMatch { optimal: JointAssignment },
}

/// Outcome of maximizing a score vector over an [`ActionSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub arm: JointAssignment,
    pub value: f64,
    pub ops: u64,
}

impl ActionSet {
    /// Number of allowed joint arms, if it fits in `u128`.
    pub fn count(&self, h: &Hypergraph) -> Option<u128> {
        match self {
            ActionSet::Product => h
                .arm_counts()
                .iter()
                .try_fold(1u128, |acc, &k| acc.checked_mul(k as u128)),
            ActionSet::Explicit(list) => Some(list.len() as u128),
            ActionSet::AvoidOrMatch { .. } => avoid_count(h).and_then(|n| n.checked_add(1)),
        }
    }

    pub fn contains(&self, h: &Hypergraph, a: &JointAssignment) -> bool {
        if h.check_assignment(a).is_err() {
            return false;
        }
        match self {
            ActionSet::Product => true,
            ActionSet::Explicit(list) => list.contains(a),
            ActionSet::AvoidOrMatch { optimal } => {
                a == optimal || a.arms().iter().zip(optimal.arms()).all(|(x, o)| x != o)
            }
        }
    }

    /// Enumerates the allowed joint arms in ascending joint index.
    /// Exponential for product-like sets; callers bound the size first.
    pub fn enumerate(&self, h: &Hypergraph) -> Vec<JointAssignment> {
        match self {
            ActionSet::Product => h
                .enumerate_joint()
                .map(|it| it.collect())
                .unwrap_or_default(),
            ActionSet::Explicit(list) => {
                let mut out = list.clone();
                out.sort_by_key(|a| h.joint_index(a));
                out.dedup();
                out
            }
            ActionSet::AvoidOrMatch { .. } => h
                .enumerate_joint()
                .map(|it| it.filter(|a| self.contains(h, a)).collect())
                .unwrap_or_default(),
        }
    }

    /// Uniform draw from the set.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, h: &Hypergraph, rng: &mut R) -> JointAssignment {
        match self {
            ActionSet::Product => JointAssignment::new(
                h.arm_counts()
                    .iter()
                    .map(|&k| rng.random_range(0..k))
                    .collect(),
            ),
            ActionSet::Explicit(list) => list[rng.random_range(0..list.len())].clone(),
            ActionSet::AvoidOrMatch { optimal } => {
                let n = avoid_count(h).expect("restricted action set size fits u128");
                let u = rng.random_range(0..n + 1);
                if u == n {
                    return optimal.clone();
                }
                let mut rest = u;
                let mut arms = vec![0; h.num_agents()];
                for (i, &k) in h.arm_counts().iter().enumerate().rev() {
                    let radix = (k - 1) as u128;
                    let digit = (rest % radix) as usize;
                    rest /= radix;
                    arms[i] = if digit >= optimal.arms()[i] {
                        digit + 1
                    } else {
                        digit
                    };
                }
                JointAssignment::new(arms)
            }
        }
    }
}

/// Maximizes `sum_e scores[a^e]` over an [`ActionSet`], reusing the
/// elimination schedule and scratch buffers across rounds.
#[derive(Debug, Clone)]
pub struct Maximizer {
    set: ActionSet,
    plan: EliminationPlan,
    workspace: Workspace,
    /// Local arms that use some agent's optimal arm (`AvoidOrMatch` only).
    forbidden: Vec<bool>,
    scratch: Vec<f64>,
}

impl Maximizer {
    pub fn new(h: &Hypergraph, set: ActionSet) -> Self {
        let forbidden = match &set {
            ActionSet::AvoidOrMatch { optimal } => (0..h.num_groups())
                .flat_map(|e| {
                    let members = h.group(e);
                    (0..h.group_size(e)).map(move |w| {
                        h.decode_local(e, w)
                            .iter()
                            .zip(members)
                            .any(|(&arm, &i)| arm == optimal.arms()[i])
                    })
                })
                .collect(),
            _ => Vec::new(),
        };
        let plan = EliminationPlan::new(h);
        Self {
            set,
            workspace: plan.workspace(),
            plan,
            forbidden,
            scratch: Vec::new(),
        }
    }

    pub fn action_set(&self) -> &ActionSet {
        &self.set
    }

    pub fn plan(&self) -> &EliminationPlan {
        &self.plan
    }

    /// `h` must be the hypergraph this maximizer was built for.
    pub fn maximize(&mut self, h: &Hypergraph, scores: &[f64]) -> Choice {
        match &self.set {
            ActionSet::Product => {
                let r = self
                    .plan
                    .argmax_with(h, scores, &mut self.workspace)
                    .expect("score vector sized from the same hypergraph");
                Choice {
                    arm: r.argmax,
                    value: r.value,
                    ops: r.op_count,
                }
            }
            ActionSet::Explicit(list) => {
                let mut best: Option<(usize, f64, usize)> = None;
                for (k, a) in list.iter().enumerate() {
                    let v = joint_score(h, scores, a.arms());
                    let idx = h.joint_index(a);
                    let better = match best {
                        None => true,
                        Some((_, bv, bi)) => v > bv || (v == bv && idx < bi),
                    };
                    if better {
                        best = Some((k, v, idx));
                    }
                }
                let (k, value, _) = best.expect("explicit action set is non-empty");
                Choice {
                    arm: list[k].clone(),
                    value,
                    ops: (list.len() * h.num_groups()) as u64,
                }
            }
            ActionSet::AvoidOrMatch { optimal } => {
                let top = Choice {
                    value: joint_score(h, scores, optimal.arms()),
                    arm: optimal.clone(),
                    ops: h.num_groups() as u64,
                };
                if avoid_count(h).is_some_and(|n| n == 0) {
                    return top;
                }
                self.scratch.clear();
                self.scratch
                    .extend(scores.iter().zip(&self.forbidden).map(|(&s, &f)| {
                        if f {
                            f64::NEG_INFINITY
                        } else {
                            s
                        }
                    }));
                let r = self
                    .plan
                    .argmax_with(h, &self.scratch, &mut self.workspace)
                    .expect("score vector sized from the same hypergraph");
                let rest = joint_score(h, scores, r.argmax.arms());
                let ops = top.ops + r.op_count;
                let rest_first = rest > top.value
                    || (rest == top.value && h.joint_index(&r.argmax) < h.joint_index(optimal));
                if rest_first {
                    Choice {
                        arm: r.argmax,
                        value: rest,
                        ops,
                    }
                } else {
                    Choice { ops, ..top }
                }
            }
        }
    }
}

/// Size of the all-avoid product, `prod_i (|A_i| - 1)`.
fn avoid_count(h: &Hypergraph) -> Option<u128> {
    h.arm_counts()
        .iter()
        .try_fold(1u128, |acc, &k| acc.checked_mul((k - 1) as u128))
}
