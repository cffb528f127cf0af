//! Coordination hypergraphs.
//!
//! Agents are vertices, groups are hyperedges. Every group `e` owns a block of
//! local arms, one per tuple of individual arms chosen by its members. Blocks
//! are laid out back to back in a flat local-arm index space of size
//! `A_loc = sum_e prod_{i in G_e} |A_i|`.
//!
//! Within a block, tuples are encoded in mixed radix with the first agent of
//! the group (in the order the group was declared) as the most significant
//! digit. Joint assignments are enumerated in the same style: agent 0 is the
//! most significant digit.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("hypergraph needs at least one agent")]
    NoAgents,
    #[error("expected {expected} arm counts, got {got}")]
    ArmCountLength { expected: usize, got: usize },
    #[error("agent {agent} has zero arms")]
    ZeroArms { agent: usize },
    #[error("group {group} is empty")]
    EmptyGroup { group: usize },
    #[error("group {group} lists agent {agent} more than once")]
    DuplicateAgent { group: usize, agent: usize },
    #[error("group {group} references agent {agent}, but there are only {num_agents} agents")]
    AgentOutOfRange {
        group: usize,
        agent: usize,
        num_agents: usize,
    },
    #[error("agent {agent} belongs to no group")]
    UncoveredAgent { agent: usize },
    #[error("group index {group} out of range (have {num_groups} groups)")]
    GroupOutOfRange { group: usize, num_groups: usize },
    #[error("chain window {window} does not fit {num_agents} agents")]
    ChainWindow { num_agents: usize, window: usize },
    #[error("arm count product overflows")]
    Overflow,
    #[error("joint assignment is invalid for this hypergraph: {0}")]
    InvalidAssignment(String),
}

/// One chosen individual arm per agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointAssignment(Vec<usize>);

impl JointAssignment {
    pub fn new(arms: Vec<usize>) -> Self {
        Self(arms)
    }

    pub fn zeros(num_agents: usize) -> Self {
        Self(vec![0; num_agents])
    }

    pub fn arms(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl From<Vec<usize>> for JointAssignment {
    fn from(arms: Vec<usize>) -> Self {
        Self(arms)
    }
}

impl fmt::Display for JointAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, a) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

/// Position of a local arm, both relative to its group and in the flat space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LocalArmIndex {
    pub group: usize,
    pub within_group: usize,
    pub flat: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    arm_counts: Vec<usize>,
    groups: Vec<Vec<usize>>,
    group_sizes: Vec<usize>,
    local_offsets: Vec<usize>,
    num_local: usize,
    agent_groups: Vec<Vec<usize>>,
}

impl Hypergraph {
    /// Validates and builds a hypergraph. `arm_counts.len()` must equal
    /// `num_agents`.
    pub fn new(
        num_agents: usize,
        arm_counts: Vec<usize>,
        groups: Vec<Vec<usize>>,
    ) -> Result<Self, GraphError> {
        if num_agents == 0 {
            return Err(GraphError::NoAgents);
        }
        if arm_counts.len() != num_agents {
            return Err(GraphError::ArmCountLength {
                expected: num_agents,
                got: arm_counts.len(),
            });
        }
        if let Some(agent) = arm_counts.iter().position(|&k| k == 0) {
            return Err(GraphError::ZeroArms { agent });
        }

        let mut agent_groups = vec![Vec::new(); num_agents];
        let mut group_sizes = Vec::with_capacity(groups.len());
        let mut local_offsets = Vec::with_capacity(groups.len());
        let mut num_local = 0usize;
        for (e, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(GraphError::EmptyGroup { group: e });
            }
            let mut size = 1usize;
            for (k, &agent) in members.iter().enumerate() {
                if agent >= num_agents {
                    return Err(GraphError::AgentOutOfRange {
                        group: e,
                        agent,
                        num_agents,
                    });
                }
                if members[..k].contains(&agent) {
                    return Err(GraphError::DuplicateAgent { group: e, agent });
                }
                agent_groups[agent].push(e);
                size = size
                    .checked_mul(arm_counts[agent])
                    .ok_or(GraphError::Overflow)?;
            }
            local_offsets.push(num_local);
            group_sizes.push(size);
            num_local = num_local.checked_add(size).ok_or(GraphError::Overflow)?;
        }
        if let Some(agent) = agent_groups.iter().position(Vec::is_empty) {
            return Err(GraphError::UncoveredAgent { agent });
        }

        Ok(Self {
            arm_counts,
            groups,
            group_sizes,
            local_offsets,
            num_local,
            agent_groups,
        })
    }

    /// Every agent has `k` arms.
    pub fn uniform(
        num_agents: usize,
        k: usize,
        groups: Vec<Vec<usize>>,
    ) -> Result<Self, GraphError> {
        Self::new(num_agents, vec![k; num_agents], groups)
    }

    /// Chain of overlapping windows `{i, .., i+d-1}` for `i = 0..=m-d`.
    pub fn chain(num_agents: usize, k: usize, window: usize) -> Result<Self, GraphError> {
        if window == 0 || window > num_agents {
            return Err(GraphError::ChainWindow { num_agents, window });
        }
        let groups = (0..=num_agents - window)
            .map(|i| (i..i + window).collect())
            .collect();
        Self::uniform(num_agents, k, groups)
    }

    pub fn num_agents(&self) -> usize {
        self.arm_counts.len()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn arm_counts(&self) -> &[usize] {
        &self.arm_counts
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group(&self, e: usize) -> &[usize] {
        &self.groups[e]
    }

    /// Number of local arms in group `e`.
    pub fn group_size(&self, e: usize) -> usize {
        self.group_sizes[e]
    }

    pub fn local_offsets(&self) -> &[usize] {
        &self.local_offsets
    }

    /// Groups that contain `agent`, ascending.
    pub fn groups_of(&self, agent: usize) -> &[usize] {
        &self.agent_groups[agent]
    }

    /// Total number of local arms, `A_loc`.
    pub fn local_arm_count(&self) -> usize {
        self.num_local
    }

    /// Flat index range of group `e`'s local arms.
    pub fn group_range(&self, e: usize) -> std::ops::Range<usize> {
        let start = self.local_offsets[e];
        start..start + self.group_sizes[e]
    }

    /// Size of the joint arm space, `prod_i |A_i|`.
    pub fn joint_count(&self) -> Result<usize, GraphError> {
        self.arm_counts
            .iter()
            .try_fold(1usize, |acc, &k| acc.checked_mul(k))
            .ok_or(GraphError::Overflow)
    }

    pub fn check_assignment(&self, a: &JointAssignment) -> Result<(), GraphError> {
        if a.len() != self.num_agents() {
            return Err(GraphError::InvalidAssignment(format!(
                "length {} but {} agents",
                a.len(),
                self.num_agents()
            )));
        }
        for (i, (&arm, &k)) in a.arms().iter().zip(&self.arm_counts).enumerate() {
            if arm >= k {
                return Err(GraphError::InvalidAssignment(format!(
                    "agent {i} picks arm {arm} but has {k} arms"
                )));
            }
        }
        Ok(())
    }

    pub fn project_local(
        &self,
        a: &JointAssignment,
        e: usize,
    ) -> Result<LocalArmIndex, GraphError> {
        if e >= self.num_groups() {
            return Err(GraphError::GroupOutOfRange {
                group: e,
                num_groups: self.num_groups(),
            });
        }
        self.check_assignment(a)?;
        let within_group = self.within_group(a.arms(), e);
        Ok(LocalArmIndex {
            group: e,
            within_group,
            flat: self.local_offsets[e] + within_group,
        })
    }

    /// Mixed-radix code of `arms` restricted to group `e`. No bounds checks.
    #[inline]
    pub fn within_group(&self, arms: &[usize], e: usize) -> usize {
        self.groups[e]
            .iter()
            .fold(0, |acc, &i| acc * self.arm_counts[i] + arms[i])
    }

    /// Flat local-arm index of group `e` under `arms`. No bounds checks.
    #[inline]
    pub fn flat_local(&self, arms: &[usize], e: usize) -> usize {
        self.local_offsets[e] + self.within_group(arms, e)
    }

    /// Inverse of [`Hypergraph::within_group`]: the members' arms, in group order.
    pub fn decode_local(&self, e: usize, within_group: usize) -> Vec<usize> {
        let members = &self.groups[e];
        let mut out = vec![0; members.len()];
        let mut rest = within_group;
        for (slot, &i) in out.iter_mut().zip(members).rev() {
            let k = self.arm_counts[i];
            *slot = rest % k;
            rest /= k;
        }
        out
    }

    /// Position of `a` in the mixed-radix joint order (agent 0 most significant).
    pub fn joint_index(&self, a: &JointAssignment) -> usize {
        a.arms()
            .iter()
            .zip(&self.arm_counts)
            .fold(0, |acc, (&arm, &k)| acc * k + arm)
    }

    /// All joint assignments in mixed-radix order. Fails if the joint space
    /// does not fit in `usize`.
    pub fn enumerate_joint(&self) -> Result<JointIter<'_>, GraphError> {
        let remaining = self.joint_count()?;
        Ok(JointIter {
            radix: &self.arm_counts,
            current: vec![0; self.num_agents()],
            remaining,
        })
    }
}

/// Odometer over the joint arm space; the last agent varies fastest.
#[derive(Debug, Clone)]
pub struct JointIter<'a> {
    radix: &'a [usize],
    current: Vec<usize>,
    remaining: usize,
}

impl Iterator for JointIter<'_> {
    type Item = JointAssignment;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let out = JointAssignment(self.current.clone());
        for (digit, &k) in self.current.iter_mut().zip(self.radix).rev() {
            *digit += 1;
            if *digit < k {
                break;
            }
            *digit = 0;
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for JointIter<'_> {}
