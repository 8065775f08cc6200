//! Simple stochastic games and their Bellman operators.
//!
//! Markov chains (`|A(s)| <= 1` everywhere) and MDPs (one player without
//! choices) are special cases. Transitions are stored sparsely; an action
//! terminates with probability `1 - T_a(s)`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::Operator;

/// Slack allowed on `T_a(s) <= 1`.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    Max,
    Min,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub reward: f64,
    /// `(successor, probability)` pairs.
    pub transitions: Vec<(usize, f64)>,
}

impl Action {
    pub fn new(reward: f64, transitions: Vec<(usize, f64)>) -> Self {
        Self {
            reward,
            transitions,
        }
    }

    /// An action that terminates surely after paying `reward`.
    pub fn terminal(reward: f64) -> Self {
        Self::new(reward, Vec::new())
    }

    /// `T_a(s)`.
    pub fn mass(&self) -> f64 {
        self.transitions.iter().map(|(_, p)| p).sum()
    }

    #[inline]
    pub fn q_value(&self, v: &[f64]) -> f64 {
        self.reward + self.transitions.iter().map(|&(t, p)| p * v[t]).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub player: Player,
    pub actions: Vec<Action>,
}

impl State {
    pub fn new(player: Player, actions: Vec<Action>) -> Self {
        Self { player, actions }
    }

    pub fn is_final(&self) -> bool {
        self.actions.is_empty()
    }

    /// Best of `values` for this state's player; 0 for an empty list.
    #[inline]
    pub fn optimum(&self, values: impl Iterator<Item = f64>) -> f64 {
        let best = match self.player {
            Player::Max => values.reduce(f64::max),
            Player::Min => values.reduce(f64::min),
        };
        best.unwrap_or(0.0)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("expected a vector of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("policy picks action {action} in state {state}, which has {available} actions")]
    DisabledAction {
        state: usize,
        action: usize,
        available: usize,
    },
    #[error("invalid model:\n{}", .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// A well-formedness problem, located by JSON-style path.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    MassExceedsOne {
        state: usize,
        action: usize,
        mass: f64,
    },
    NegativeProbability {
        state: usize,
        action: usize,
        successor: usize,
        p: f64,
    },
    NegativeReward {
        state: usize,
        action: usize,
        reward: f64,
    },
    DanglingSuccessor {
        state: usize,
        action: usize,
        successor: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MassExceedsOne { state, action, mass } => {
                write!(f, "states[{state}].actions[{action}]: total probability {mass} exceeds 1")
            }
            Violation::NegativeProbability { state, action, successor, p } => write!(
                f,
                "states[{state}].actions[{action}].transitions[{successor}]: probability {p} is negative or not a number"
            ),
            Violation::NegativeReward { state, action, reward } => {
                write!(f, "states[{state}].actions[{action}].reward: {reward} is negative or not a number")
            }
            Violation::DanglingSuccessor { state, action, successor } => write!(
                f,
                "states[{state}].actions[{action}].transitions: successor {successor} does not exist"
            ),
        }
    }
}

/// A simple stochastic game. Fields are plain data; use
/// [`Ssg::validate`] (or the checked constructors) before relying on the
/// definition's invariants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ssg {
    pub states: Vec<State>,
}

impl Ssg {
    /// Builds and validates a game, renormalising any action whose mass
    /// exceeds 1 by at most [`MASS_TOLERANCE`].
    pub fn new(states: Vec<State>) -> Result<Self, ModelError> {
        let mut g = Ssg { states };
        let violations = g.validate();
        if !violations.is_empty() {
            return Err(ModelError::Invalid(violations));
        }
        g.renormalize();
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let raw: Ssg = serde_json::from_str(text)?;
        Ssg::new(raw.states)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Ssg::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialises")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.states.iter().map(|s| s.actions.len()).sum()
    }

    pub fn is_markov_chain(&self) -> bool {
        self.states.iter().all(|s| s.actions.len() <= 1)
    }

    /// Final states `F = { s | A(s) = {} }`.
    pub fn final_states(&self) -> Vec<usize> {
        (0..self.states.len())
            .filter(|&s| self.states[s].is_final())
            .collect()
    }

    /// Every violation of the game definition; empty when well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.states.len();
        let mut out = Vec::new();
        for (s, st) in self.states.iter().enumerate() {
            for (a, act) in st.actions.iter().enumerate() {
                if !(act.reward >= 0.0) || act.reward.is_infinite() {
                    out.push(Violation::NegativeReward {
                        state: s,
                        action: a,
                        reward: act.reward,
                    });
                }
                for (i, &(t, p)) in act.transitions.iter().enumerate() {
                    if t >= n {
                        out.push(Violation::DanglingSuccessor {
                            state: s,
                            action: a,
                            successor: t,
                        });
                    }
                    if !(p >= 0.0) {
                        out.push(Violation::NegativeProbability {
                            state: s,
                            action: a,
                            successor: i,
                            p,
                        });
                    }
                }
                let mass = act.mass();
                if mass > 1.0 + MASS_TOLERANCE {
                    out.push(Violation::MassExceedsOne {
                        state: s,
                        action: a,
                        mass,
                    });
                }
            }
        }
        out
    }

    fn renormalize(&mut self) {
        for st in &mut self.states {
            for act in &mut st.actions {
                act.transitions.retain(|&(_, p)| p > 0.0);
                let mass = act.mass();
                if mass > 1.0 {
                    act.transitions.iter_mut().for_each(|(_, p)| *p /= mass);
                }
            }
        }
    }

    /// `f_G(v)`.
    pub fn bellman_apply(&self, v: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_len(v.len(), self.num_states())?;
        let mut out = vec![0.0; self.num_states()];
        self.bellman_into(v, &mut out);
        Ok(out)
    }

    pub(crate) fn bellman_into(&self, v: &[f64], out: &mut [f64]) {
        for (o, st) in out.iter_mut().zip(&self.states) {
            *o = st.optimum(st.actions.iter().map(|a| a.q_value(v)));
        }
    }

    /// Per-state optimum of `q` (0 at final states).
    fn state_values_of(&self, index: &StateActionIndex, q: &[f64]) -> Vec<f64> {
        self.states
            .iter()
            .enumerate()
            .map(|(s, st)| st.optimum(index.range(s).map(|i| q[i])))
            .collect()
    }

    /// The state-action operator `g_G(q)(s, a) = R_a(s) + sum_s' T_a(s, s') opt_a' q(s', a')`.
    pub fn state_action_bellman_apply(&self, q: &[f64]) -> Result<Vec<f64>, ModelError> {
        let index = StateActionIndex::new(self);
        self.check_len(q.len(), index.len())?;
        let values = self.state_values_of(&index, q);
        Ok(self
            .states
            .iter()
            .flat_map(|st| st.actions.iter().map(|a| a.q_value(&values)))
            .collect())
    }

    /// `G^pi`: policy states keep only the chosen action.
    pub fn restrict_policy(&self, pi: &Policy) -> Result<Ssg, ModelError> {
        let mut g = self.clone();
        for (s, choice) in pi.choices.iter().enumerate() {
            let Some(a) = *choice else { continue };
            let Some(st) = g.states.get_mut(s) else {
                return Err(ModelError::DisabledAction {
                    state: s,
                    action: a,
                    available: 0,
                });
            };
            if a >= st.actions.len() {
                return Err(ModelError::DisabledAction {
                    state: s,
                    action: a,
                    available: st.actions.len(),
                });
            }
            let chosen = st.actions.swap_remove(a);
            st.actions = vec![chosen];
        }
        Ok(g)
    }

    /// Splits choice and chance: state `s` moves with probability 1 and no
    /// reward to pair-state `(s, a)`, which pays `R_a(s)` and moves on like
    /// `a`. Original states keep indices `0..|S|`; pair `i` of
    /// [`StateActionIndex`] becomes state `|S| + i`, owned by MIN.
    pub fn split_state_action(&self) -> Ssg {
        let n = self.num_states();
        let index = StateActionIndex::new(self);
        let mut states: Vec<State> = self
            .states
            .iter()
            .enumerate()
            .map(|(s, st)| {
                State::new(
                    st.player,
                    index
                        .range(s)
                        .map(|i| Action::new(0.0, vec![(n + i, 1.0)]))
                        .collect(),
                )
            })
            .collect();
        for st in &self.states {
            for act in &st.actions {
                states.push(State::new(Player::Min, vec![act.clone()]));
            }
        }
        Ssg { states }
    }

    /// `v -> f_G^k(v)`.
    pub fn k_step_operator(&self, k: usize) -> KStep<'_> {
        KStep {
            game: self,
            k: k.max(1),
        }
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<(), ModelError> {
        if got == expected {
            Ok(())
        } else {
            Err(ModelError::Dimension { expected, got })
        }
    }

    /// Multiplies every reward by `c`.
    pub fn scale_rewards(&mut self, c: f64) {
        for st in &mut self.states {
            for act in &mut st.actions {
                act.reward *= c;
            }
        }
    }
}

/// The Bellman operator `f_G`.
impl Operator for Ssg {
    fn dim(&self) -> usize {
        self.num_states()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.bellman_into(x, out)
    }
}

/// The state-action Bellman operator `g_G` as an [`Operator`].
pub struct StateActionOperator<'a> {
    game: &'a Ssg,
    index: StateActionIndex,
}

impl<'a> StateActionOperator<'a> {
    pub fn new(game: &'a Ssg) -> Self {
        Self {
            game,
            index: StateActionIndex::new(game),
        }
    }
}

impl Operator for StateActionOperator<'_> {
    fn dim(&self) -> usize {
        self.index.len()
    }
    fn apply_into(&self, q: &[f64], out: &mut [f64]) {
        let values = self.game.state_values_of(&self.index, q);
        let mut i = 0;
        for st in &self.game.states {
            for a in &st.actions {
                out[i] = a.q_value(&values);
                i += 1;
            }
        }
    }
}

/// `f_G^k`.
pub struct KStep<'a> {
    game: &'a Ssg,
    k: usize,
}

impl Operator for KStep<'_> {
    fn dim(&self) -> usize {
        self.game.num_states()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let mut cur = x.to_vec();
        for _ in 0..self.k {
            self.game.bellman_into(&cur, out);
            cur.copy_from_slice(out);
        }
    }
}

/// Memoryless deterministic policy; `choices[s] = Some(a)` on its domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy {
    pub choices: Vec<Option<usize>>,
}

impl Policy {
    pub fn empty(num_states: usize) -> Self {
        Self {
            choices: vec![None; num_states],
        }
    }

    /// Combines two policies with disjoint domains.
    pub fn union(&self, other: &Policy) -> Policy {
        Policy {
            choices: self
                .choices
                .iter()
                .zip(&other.choices)
                .map(|(a, b)| a.or(*b))
                .collect(),
        }
    }

    pub fn is_valid_for(&self, g: &Ssg) -> bool {
        self.choices.len() == g.num_states()
            && self
                .choices
                .iter()
                .zip(&g.states)
                .all(|(c, st)| c.is_none_or(|a| a < st.actions.len()))
    }
}

/// Bijection between enabled `(s, a)` pairs and `0..sum_s |A(s)|`,
/// ordered by state then action.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateActionIndex {
    offsets: Vec<usize>,
}

impl StateActionIndex {
    pub fn new(g: &Ssg) -> Self {
        let mut offsets = Vec::with_capacity(g.num_states() + 1);
        let mut acc = 0;
        offsets.push(0);
        for st in &g.states {
            acc += st.actions.len();
            offsets.push(acc);
        }
        Self { offsets }
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, s: usize, a: usize) -> Option<usize> {
        let i = self.offsets.get(s)? + a;
        (i < *self.offsets.get(s + 1)?).then_some(i)
    }

    pub fn pair(&self, i: usize) -> Option<(usize, usize)> {
        if i >= self.len() {
            return None;
        }
        let s = self.offsets.partition_point(|&o| o <= i) - 1;
        Some((s, i - self.offsets[s]))
    }

    pub fn range(&self, s: usize) -> std::ops::Range<usize> {
        self.offsets[s]..self.offsets[s + 1]
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.offsets.len() - 1)
            .flat_map(move |s| (0..self.offsets[s + 1] - self.offsets[s]).map(move |a| (s, a)))
    }
}
