//! Count-based empirical games.
//!
//! A [`SamplerState`] records outcomes drawn from a true game. The
//! empirical game built from it keeps the true game's structure: mass only
//! on true successors, zero reward wherever the true reward is zero, and
//! full mass wherever the true action never terminates.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{Action, ModelError, Player, Ssg, State, StateActionIndex, MASS_TOLERANCE};

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("action {action} is not enabled in state {state} ({available} available)")]
    DisabledAction {
        state: usize,
        action: usize,
        available: usize,
    },
    #[error("the model has no state-action pairs")]
    NoPairs,
    #[error("sampler state does not match the model structure")]
    Mismatch,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Structural facts of one true state-action pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairPrior {
    pub support: Vec<usize>,
    pub terminating: bool,
    pub rewarded: bool,
}

/// Supports, termination and reward flags of every pair of a true game.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuralPrior {
    players: Vec<Player>,
    index: StateActionIndex,
    pairs: Vec<PairPrior>,
}

impl StructuralPrior {
    pub fn from_model(truth: &Ssg) -> Self {
        let index = StateActionIndex::new(truth);
        let pairs = index
            .pairs()
            .map(|(s, a)| {
                let act = &truth.states[s].actions[a];
                PairPrior {
                    support: act
                        .transitions
                        .iter()
                        .filter(|(_, p)| *p > 0.0)
                        .map(|(t, _)| *t)
                        .collect(),
                    terminating: (act.mass() - 1.0).abs() > MASS_TOLERANCE,
                    rewarded: act.reward > 0.0,
                }
            })
            .collect();
        Self {
            players: truth.states.iter().map(|s| s.player).collect(),
            index,
            pairs,
        }
    }

    pub fn index(&self) -> &StateActionIndex {
        &self.index
    }

    pub fn pair(&self, i: usize) -> &PairPrior {
        &self.pairs[i]
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }
}

/// Observation counts of one pair. `successors` is aligned with the
/// pair's support.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairCounts {
    pub successors: Vec<u64>,
    pub terminated: u64,
    pub total: u64,
    pub reward: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerState {
    pub pairs: Vec<PairCounts>,
    pub steps: u64,
}

impl SamplerState {
    pub fn new(prior: &StructuralPrior) -> Self {
        Self {
            pairs: prior
                .pairs
                .iter()
                .map(|p| PairCounts {
                    successors: vec![0; p.support.len()],
                    ..PairCounts::default()
                })
                .collect(),
            steps: 0,
        }
    }

    pub fn total_observations(&self) -> u64 {
        self.pairs.iter().map(|p| p.total).sum()
    }

    /// Writes the counts sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SamplingError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SamplingError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    fn check(&self, prior: &StructuralPrior) -> Result<(), SamplingError> {
        let ok = self.pairs.len() == prior.pairs.len()
            && self
                .pairs
                .iter()
                .zip(&prior.pairs)
                .all(|(c, p)| c.successors.len() == p.support.len());
        if ok {
            Ok(())
        } else {
            Err(SamplingError::Mismatch)
        }
    }
}

/// Multiplicative reward noise `r * (1 + u)`, `u` uniform in `[-scale, scale]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RewardNoise {
    pub scale: f64,
}

fn pair_index(
    truth: &Ssg,
    prior: &StructuralPrior,
    s: usize,
    a: usize,
) -> Result<usize, SamplingError> {
    let available = truth.states.get(s).map_or(0, |st| st.actions.len());
    prior
        .index
        .index(s, a)
        .filter(|_| a < available)
        .ok_or(SamplingError::DisabledAction {
            state: s,
            action: a,
            available,
        })
}

fn draw_outcome<R: Rng + ?Sized>(act: &Action, prior: &PairPrior, rng: &mut R) -> Option<usize> {
    let weights: Vec<f64> = act
        .transitions
        .iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|(_, p)| *p)
        .collect();
    let mass: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>();
    if prior.terminating {
        if u >= mass {
            return None;
        }
    } else {
        // never terminate, whatever the rounding of the stored mass
        u *= mass;
    }
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return Some(k);
        }
    }
    Some(weights.len() - 1)
}

fn record<R: Rng + ?Sized>(
    st: &mut SamplerState,
    truth: &Ssg,
    prior: &StructuralPrior,
    i: usize,
    noise: Option<RewardNoise>,
    rng: &mut R,
) {
    let (s, a) = prior.index.pair(i).expect("pair index in range");
    let act = &truth.states[s].actions[a];
    let pp = &prior.pairs[i];
    let outcome = if pp.support.is_empty() && pp.terminating {
        None
    } else {
        draw_outcome(act, pp, rng)
    };
    let c = &mut st.pairs[i];
    match outcome {
        Some(k) => c.successors[k] += 1,
        None => c.terminated += 1,
    }
    c.total += 1;
    if c.reward.is_none() {
        c.reward = Some(match noise {
            Some(n) if act.reward > 0.0 && n.scale > 0.0 => {
                (act.reward * (1.0 + n.scale * (2.0 * rng.random::<f64>() - 1.0))).max(0.0)
            }
            _ => act.reward,
        });
    }
    st.steps += 1;
}

/// Draws one outcome of action `a` in state `s` and records it. Returns the
/// flat pair index.
pub fn observe_step<R: Rng + ?Sized>(
    st: &mut SamplerState,
    truth: &Ssg,
    prior: &StructuralPrior,
    s: usize,
    a: usize,
    rng: &mut R,
) -> Result<usize, SamplingError> {
    st.check(prior)?;
    let i = pair_index(truth, prior, s, a)?;
    record(st, truth, prior, i, None, rng);
    Ok(i)
}

/// `k` observations, each at a pair drawn uniformly over all pairs.
/// Returns the pairs touched, in draw order.
pub fn batch_observe<R: Rng + ?Sized>(
    st: &mut SamplerState,
    truth: &Ssg,
    prior: &StructuralPrior,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>, SamplingError> {
    st.check(prior)?;
    let pairs = prior.num_pairs();
    if pairs == 0 {
        return Err(SamplingError::NoPairs);
    }
    let mut touched = Vec::with_capacity(k);
    for _ in 0..k {
        let i = rng.random_range(0..pairs);
        record(st, truth, prior, i, None, rng);
        touched.push(i);
    }
    Ok(touched)
}

/// The empirical action of pair `i`.
pub fn empirical_action(st: &SamplerState, prior: &StructuralPrior, i: usize) -> Action {
    let pp = &prior.pairs[i];
    let c = &st.pairs[i];
    let reward = if pp.rewarded {
        c.reward.unwrap_or(0.0)
    } else {
        0.0
    };
    let transitions = if c.total == 0 {
        let slots = pp.support.len() + usize::from(pp.terminating);
        let p = if slots == 0 { 0.0 } else { 1.0 / slots as f64 };
        pp.support.iter().map(|&t| (t, p)).collect()
    } else {
        debug_assert!(pp.terminating || c.terminated == 0);
        let n = c.total as f64;
        pp.support
            .iter()
            .zip(&c.successors)
            .filter(|(_, k)| **k > 0)
            .map(|(&t, &k)| (t, k as f64 / n))
            .collect()
    };
    Action::new(reward, transitions)
}

/// The empirical game `G_n` of the current counts.
pub fn empirical_ssg(st: &SamplerState, prior: &StructuralPrior) -> Ssg {
    let mut states: Vec<State> = prior
        .players
        .iter()
        .map(|&p| State::new(p, Vec::new()))
        .collect();
    for (i, (s, _)) in prior.index.pairs().enumerate() {
        states[s].actions.push(empirical_action(st, prior, i));
    }
    Ssg { states }
}

/// A sampler bundled with its true game and an incrementally refreshed
/// empirical game.
#[derive(Clone, Debug)]
pub struct Sampler<'a> {
    truth: &'a Ssg,
    prior: StructuralPrior,
    state: SamplerState,
    game: Ssg,
    noise: Option<RewardNoise>,
}

impl<'a> Sampler<'a> {
    pub fn new(truth: &'a Ssg) -> Self {
        let prior = StructuralPrior::from_model(truth);
        let state = SamplerState::new(&prior);
        let game = empirical_ssg(&state, &prior);
        Self {
            truth,
            prior,
            state,
            game,
            noise: None,
        }
    }

    /// Resumes from saved counts.
    pub fn resume(truth: &'a Ssg, state: SamplerState) -> Result<Self, SamplingError> {
        let prior = StructuralPrior::from_model(truth);
        state.check(&prior)?;
        let game = empirical_ssg(&state, &prior);
        Ok(Self {
            truth,
            prior,
            state,
            game,
            noise: None,
        })
    }

    pub fn with_reward_noise(mut self, noise: RewardNoise) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn prior(&self) -> &StructuralPrior {
        &self.prior
    }

    pub fn state(&self) -> &SamplerState {
        &self.state
    }

    pub fn game(&self) -> &Ssg {
        &self.game
    }

    fn refresh(&mut self, i: usize) {
        let (s, a) = self.prior.index.pair(i).expect("pair index in range");
        self.game.states[s].actions[a] = empirical_action(&self.state, &self.prior, i);
    }

    pub fn observe<R: Rng + ?Sized>(
        &mut self,
        s: usize,
        a: usize,
        rng: &mut R,
    ) -> Result<(), SamplingError> {
        let i = pair_index(self.truth, &self.prior, s, a)?;
        record(&mut self.state, self.truth, &self.prior, i, self.noise, rng);
        self.refresh(i);
        Ok(())
    }

    pub fn observe_batch<R: Rng + ?Sized>(
        &mut self,
        k: usize,
        rng: &mut R,
    ) -> Result<(), SamplingError> {
        let pairs = self.prior.num_pairs();
        if pairs == 0 {
            return Err(SamplingError::NoPairs);
        }
        for _ in 0..k {
            let i = rng.random_range(0..pairs);
            record(&mut self.state, self.truth, &self.prior, i, self.noise, rng);
            self.refresh(i);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SamplingViolation {
    Structure(String),
    OffSupport {
        state: usize,
        action: usize,
        successor: usize,
    },
    RewardWithoutSupport {
        state: usize,
        action: usize,
        reward: f64,
    },
    TerminatingMass {
        state: usize,
        action: usize,
        mass: f64,
    },
}

impl fmt::Display for SamplingViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Structure(m) => write!(f, "structure: {m}"),
            Self::OffSupport {
                state,
                action,
                successor,
            } => {
                write!(
                    f,
                    "states[{state}].actions[{action}]: mass on non-successor {successor}"
                )
            }
            Self::RewardWithoutSupport {
                state,
                action,
                reward,
            } => {
                write!(
                    f,
                    "states[{state}].actions[{action}]: reward {reward} where the true reward is 0"
                )
            }
            Self::TerminatingMass {
                state,
                action,
                mass,
            } => {
                write!(
                    f,
                    "states[{state}].actions[{action}]: mass {mass} for a non-terminating action"
                )
            }
        }
    }
}

/// Checks the structural constraints of one empirical game against the
/// true game.
pub fn sampling_validity_check(
    gn: &Ssg,
    prior: &StructuralPrior,
    truth: &Ssg,
) -> Vec<SamplingViolation> {
    let mut out = Vec::new();
    if gn.num_states() != truth.num_states() {
        out.push(SamplingViolation::Structure(format!(
            "{} states, expected {}",
            gn.num_states(),
            truth.num_states()
        )));
        return out;
    }
    for (s, (st, tr)) in gn.states.iter().zip(&truth.states).enumerate() {
        if st.player != tr.player || st.actions.len() != tr.actions.len() {
            out.push(SamplingViolation::Structure(format!(
                "state {s} differs in owner or action count"
            )));
            continue;
        }
        for (a, act) in st.actions.iter().enumerate() {
            let Some(pp) = prior.index.index(s, a).map(|i| &prior.pairs[i]) else {
                out.push(SamplingViolation::Structure(format!(
                    "pair ({s}, {a}) missing from prior"
                )));
                continue;
            };
            for &(t, p) in &act.transitions {
                if p != 0.0 && !pp.support.contains(&t) {
                    out.push(SamplingViolation::OffSupport {
                        state: s,
                        action: a,
                        successor: t,
                    });
                }
            }
            if !pp.rewarded && act.reward != 0.0 {
                out.push(SamplingViolation::RewardWithoutSupport {
                    state: s,
                    action: a,
                    reward: act.reward,
                });
            }
            let mass = act.mass();
            if !pp.terminating && (mass - 1.0).abs() > MASS_TOLERANCE {
                out.push(SamplingViolation::TerminatingMass {
                    state: s,
                    action: a,
                    mass,
                });
            }
        }
    }
    out
}

/// `max |T_n(s,a,s') - T(s,a,s')|` over all pairs and successors,
/// including the termination entry.
pub fn transition_distance(a: &Ssg, b: &Ssg) -> Result<f64, ModelError> {
    if a.num_states() != b.num_states() {
        return Err(ModelError::Dimension {
            expected: a.num_states(),
            got: b.num_states(),
        });
    }
    let mut worst: f64 = 0.0;
    for (sa, sb) in a.states.iter().zip(&b.states) {
        if sa.actions.len() != sb.actions.len() {
            return Err(ModelError::Dimension {
                expected: sa.actions.len(),
                got: sb.actions.len(),
            });
        }
        for (x, y) in sa.actions.iter().zip(&sb.actions) {
            let mut row = vec![0.0; a.num_states()];
            for &(t, p) in &x.transitions {
                row[t] += p;
            }
            for &(t, p) in &y.transitions {
                row[t] -= p;
            }
            let term = (x.mass() - y.mass()).abs();
            worst = row.iter().fold(worst.max(term), |m, v| m.max(v.abs()));
        }
    }
    Ok(worst)
}

/// `max |R_n(s,a) - R(s,a)|`.
pub fn reward_distance(a: &Ssg, b: &Ssg) -> f64 {
    a.states
        .iter()
        .zip(&b.states)
        .flat_map(|(x, y)| {
            x.actions
                .iter()
                .zip(&y.actions)
                .map(|(p, q)| (p.reward - q.reward).abs())
        })
        .fold(0.0, f64::max)
}
