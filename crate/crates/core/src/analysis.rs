//! Ground truth for benchmarks and tests.
//!
//! Chain values split into three structurally determined classes: states
//! that never see a reward (value 0), states that can reach a closed,
//! fully non-terminating class carrying a reward (value `+inf`), and the
//! rest, whose values solve a non-singular linear system.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::iteration::{kleene_iterate, StoppingRule};
use crate::models::{Policy, Ssg, MASS_TOLERANCE};
use crate::value::{sup_distance, FnOperator, Operator, ValueVector, ZeroBox};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("state {state} has {actions} actions; a Markov chain allows at most one")]
    NotAChain { state: usize, actions: usize },
    #[error("{needed} joint policies exceed the budget of {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error(
        "linear solve on the finite block failed and Kleene did not converge (classification bug?)"
    )]
    Unsolvable,
    #[error("operator list is empty")]
    EmptyEnvelope,
    #[error("operator {index} has dimension {got}, expected {expected}")]
    Dimension {
        index: usize,
        expected: usize,
        got: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StateClass {
    Zero,
    Infinite,
    Finite,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Classification {
    pub labels: Vec<StateClass>,
}

impl Classification {
    pub fn of(&self, class: StateClass) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&s| self.labels[s] == class)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueMethod {
    ChainSolve,
    PolicyEnumeration,
    Kleene,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactValue {
    pub value: ValueVector,
    /// `(pi_min, pi_max)` realising the value.
    pub witness: Option<(Policy, Policy)>,
    pub method: ValueMethod,
}

fn check_chain(m: &Ssg) -> Result<(), AnalysisError> {
    match m.states.iter().position(|s| s.actions.len() > 1) {
        Some(state) => Err(AnalysisError::NotAChain {
            state,
            actions: m.states[state].actions.len(),
        }),
        None => Ok(()),
    }
}

fn chain_reward(m: &Ssg, s: usize) -> f64 {
    m.states[s].actions.first().map_or(0.0, |a| a.reward)
}

fn chain_mass(m: &Ssg, s: usize) -> f64 {
    m.states[s].actions.first().map_or(0.0, |a| a.mass())
}

/// States that can reach some state in `targets` (including the targets).
fn backward_closure(preds: &[Vec<usize>], targets: impl IntoIterator<Item = usize>) -> Vec<bool> {
    let mut seen = vec![false; preds.len()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for t in targets {
        if !seen[t] {
            seen[t] = true;
            queue.push_back(t);
        }
    }
    while let Some(s) = queue.pop_front() {
        for &p in &preds[s] {
            if !seen[p] {
                seen[p] = true;
                queue.push_back(p);
            }
        }
    }
    seen
}

/// Labels every state of a Markov chain as zero, infinite or finite value.
pub fn classify_chain(m: &Ssg) -> Result<Classification, AnalysisError> {
    check_chain(m)?;
    let n = m.num_states();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    let mut preds = vec![Vec::new(); n];
    for (s, st) in m.states.iter().enumerate() {
        for act in &st.actions {
            for &(t, p) in &act.transitions {
                if p > 0.0 {
                    graph.add_edge(nodes[s], nodes[t], ());
                    preds[t].push(s);
                }
            }
        }
    }

    let sccs = tarjan_scc(&graph);
    let mut component = vec![0; n];
    for (c, members) in sccs.iter().enumerate() {
        for v in members {
            component[v.index()] = c;
        }
    }

    let positive: Vec<usize> = (0..n).filter(|&s| chain_reward(m, s) > 0.0).collect();
    let reaches_reward = backward_closure(&preds, positive);

    // An SCC is essential when nothing leaves it and no member can terminate.
    let mut infinite_seeds = Vec::new();
    for (c, members) in sccs.iter().enumerate() {
        let closed = members
            .iter()
            .all(|v| graph.neighbors(*v).all(|w| component[w.index()] == c));
        let full_mass = members
            .iter()
            .all(|v| (chain_mass(m, v.index()) - 1.0).abs() <= MASS_TOLERANCE);
        let rewarded = members.iter().any(|v| reaches_reward[v.index()]);
        if closed && full_mass && rewarded {
            infinite_seeds.extend(members.iter().map(|v| v.index()));
        }
    }
    let infinite = backward_closure(&preds, infinite_seeds);

    let labels = (0..n)
        .map(|s| {
            if !reaches_reward[s] {
                StateClass::Zero
            } else if infinite[s] {
                StateClass::Infinite
            } else {
                StateClass::Finite
            }
        })
        .collect();
    Ok(Classification { labels })
}

/// Residual bound for accepting the linear solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Least fixpoint of a chain's Bellman operator, `+inf` where infinite.
pub fn exact_chain_value(m: &Ssg) -> Result<ExactValue, AnalysisError> {
    let classes = classify_chain(m)?;
    let n = m.num_states();
    let finite = classes.of(StateClass::Finite);
    let mut value = vec![0.0; n];
    for s in classes.of(StateClass::Infinite) {
        value[s] = f64::INFINITY;
    }
    if finite.is_empty() {
        return Ok(ExactValue {
            value: ValueVector(value),
            witness: None,
            method: ValueMethod::ChainSolve,
        });
    }

    let mut local = vec![usize::MAX; n];
    for (i, &s) in finite.iter().enumerate() {
        local[s] = i;
    }
    let k = finite.len();
    let mut a = DMatrix::<f64>::identity(k, k);
    let mut b = DVector::<f64>::zeros(k);
    for (i, &s) in finite.iter().enumerate() {
        b[i] = chain_reward(m, s);
        if let Some(act) = m.states[s].actions.first() {
            for &(t, p) in &act.transitions {
                // finite states only reach zero-value or finite states
                if local[t] != usize::MAX {
                    a[(i, local[t])] -= p;
                }
            }
        }
    }
    let solved = a.clone().lu().solve(&b).filter(|x| {
        let r = &a * x - &b;
        x.iter().all(|v| v.is_finite()) && r.amax() <= RESIDUAL_TOLERANCE
    });
    let method = match solved {
        Some(x) => {
            for (i, &s) in finite.iter().enumerate() {
                value[s] = x[i].max(0.0);
            }
            ValueMethod::ChainSolve
        }
        None => {
            let zeroed = FnOperator::new(k, |v: &[f64], out: &mut [f64]| {
                for (i, &s) in finite.iter().enumerate() {
                    out[i] = chain_reward(m, s)
                        + m.states[s].actions.first().map_or(0.0, |act| {
                            act.transitions
                                .iter()
                                .filter(|(t, _)| local[*t] != usize::MAX)
                                .map(|&(t, p)| p * v[local[t]])
                                .sum()
                        });
                }
            });
            let r = kleene_iterate(
                &zeroed,
                &StoppingRule::steps(10_000_000).with_change_threshold(1e-12),
            )
            .map_err(|_| AnalysisError::Unsolvable)?;
            if !r.converged {
                return Err(AnalysisError::Unsolvable);
            }
            for (i, &s) in finite.iter().enumerate() {
                value[s] = r.value[i];
            }
            ValueMethod::Kleene
        }
    };
    Ok(ExactValue {
        value: ValueVector(value),
        witness: None,
        method,
    })
}

/// All policies for the given states, in lexicographic order with lower
/// action indices first.
fn enumerate_policies(g: &Ssg, owned: &[usize]) -> Vec<Policy> {
    let mut out = vec![Policy::empty(g.num_states())];
    for &s in owned {
        let k = g.states[s].actions.len();
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |a| {
                    let mut q = p.clone();
                    q.choices[s] = Some(a);
                    q
                })
            })
            .collect();
    }
    out
}

fn same_value(a: f64, b: f64) -> bool {
    a == b
        || (a.is_finite() && b.is_finite() && (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0))
}

fn matches_everywhere(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| same_value(*x, *y))
}

/// Number of joint memoryless policies of `g`.
pub fn joint_policy_count(g: &Ssg) -> u128 {
    g.states
        .iter()
        .filter(|s| !s.is_final())
        .fold(1u128, |acc, s| acc.saturating_mul(s.actions.len() as u128))
}

/// Game value by enumerating memoryless policies: pointwise min over MIN
/// policies of the pointwise max over MAX policies of the chain value.
pub fn exact_ssg_value(g: &Ssg, budget: u128) -> Result<ExactValue, AnalysisError> {
    let needed = joint_policy_count(g);
    if needed > budget {
        return Err(AnalysisError::BudgetExceeded { needed, budget });
    }
    use crate::models::Player;
    let owned = |p: Player| -> Vec<usize> {
        (0..g.num_states())
            .filter(|&s| g.states[s].player == p && !g.states[s].is_final())
            .collect()
    };
    let min_policies = enumerate_policies(g, &owned(Player::Min));
    let max_policies = enumerate_policies(g, &owned(Player::Max));

    let mut inner: Vec<(Vec<f64>, Vec<Vec<f64>>)> = Vec::with_capacity(min_policies.len());
    for pmin in &min_policies {
        let mut best = vec![f64::NEG_INFINITY; g.num_states()];
        let mut per_max = Vec::with_capacity(max_policies.len());
        for pmax in &max_policies {
            let chain = g
                .restrict_policy(&pmin.union(pmax))
                .expect("enumerated policies are valid");
            let v = exact_chain_value(&chain)?.value.0;
            for (b, x) in best.iter_mut().zip(&v) {
                *b = b.max(*x);
            }
            per_max.push(v);
        }
        inner.push((best, per_max));
    }
    let mut value = vec![f64::INFINITY; g.num_states()];
    for (best, _) in &inner {
        for (v, x) in value.iter_mut().zip(best) {
            *v = v.min(*x);
        }
    }

    let pick = |candidates: &mut dyn Iterator<Item = &Vec<f64>>, target: &[f64]| -> usize {
        let all: Vec<&Vec<f64>> = candidates.collect();
        all.iter()
            .position(|v| matches_everywhere(v, target))
            .unwrap_or_else(|| {
                // numerically no exact match: closest candidate
                let mut best = 0;
                let mut dist = f64::INFINITY;
                for (i, v) in all.iter().enumerate() {
                    let d = crate::value::error_against(v, target);
                    if d < dist {
                        dist = d;
                        best = i;
                    }
                }
                best
            })
    };
    let i_min = pick(&mut inner.iter().map(|(b, _)| b), &value);
    let target = inner[i_min].0.clone();
    let i_max = pick(&mut inner[i_min].1.iter(), &target);

    Ok(ExactValue {
        value: ValueVector(value),
        witness: Some((min_policies[i_min].clone(), max_policies[i_max].clone())),
        method: ValueMethod::PolicyEnumeration,
    })
}

/// Pointwise maximum of a family of operators.
pub struct Envelope<'a> {
    ops: Vec<Box<dyn Operator + 'a>>,
}

pub fn sup_envelope<'a>(ops: Vec<Box<dyn Operator + 'a>>) -> Result<Envelope<'a>, AnalysisError> {
    let first = ops.first().ok_or(AnalysisError::EmptyEnvelope)?.dim();
    if let Some((index, op)) = ops.iter().enumerate().find(|(_, o)| o.dim() != first) {
        return Err(AnalysisError::Dimension {
            index,
            expected: first,
            got: op.dim(),
        });
    }
    Ok(Envelope { ops })
}

impl Operator for Envelope<'_> {
    fn dim(&self) -> usize {
        self.ops[0].dim()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.ops[0].apply_into(x, out);
        let mut tmp = vec![0.0; out.len()];
        for op in &self.ops[1..] {
            op.apply_into(x, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o = o.max(*t);
            }
        }
    }
}

/// Coordinates of a box with an infinite bound are sampled from
/// `[0, UNBOUNDED_SAMPLE_RANGE]`.
pub const UNBOUNDED_SAMPLE_RANGE: f64 = 10.0;

#[derive(Clone, Debug)]
pub struct PropertyReport {
    pub samples: usize,
    /// Pairs `x <= y` with `f(x) <= f(y)` failing somewhere.
    pub monotonicity_violations: Vec<(Vec<f64>, Vec<f64>)>,
    pub max_lipschitz_ratio: f64,
    pub lipschitz_witness: Option<(Vec<f64>, Vec<f64>)>,
}

impl PropertyReport {
    pub fn is_monotone(&self) -> bool {
        self.monotonicity_violations.is_empty()
    }

    pub fn is_non_expansive(&self) -> bool {
        self.max_lipschitz_ratio <= 1.0 + 1e-12
    }
}

/// Samples random pairs from the box and reports empirical violations of
/// monotonicity and the largest observed Lipschitz ratio.
pub fn check_operator_properties<O: Operator + ?Sized>(
    f: &O,
    domain: &ZeroBox,
    samples: usize,
    seed: u64,
) -> PropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = domain.dim();
    let hi: Vec<f64> = domain
        .bound()
        .iter()
        .map(|b| {
            if b.is_finite() {
                *b
            } else {
                UNBOUNDED_SAMPLE_RANGE
            }
        })
        .collect();
    let draw =
        |rng: &mut ChaCha8Rng| -> Vec<f64> { hi.iter().map(|h| rng.random::<f64>() * h).collect() };
    let mut report = PropertyReport {
        samples,
        monotonicity_violations: Vec::new(),
        max_lipschitz_ratio: 0.0,
        lipschitz_witness: None,
    };
    for _ in 0..samples.max(1) {
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let fa = f.apply(&a);
        let fb = f.apply(&b);
        let dist = sup_distance(&a, &b);
        if dist > 0.0 {
            let ratio = sup_distance(&fa, &fb) / dist;
            if ratio > report.max_lipschitz_ratio {
                report.max_lipschitz_ratio = ratio;
                report.lipschitz_witness = Some((a.clone(), b.clone()));
            }
        }
        let lo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect();
        let up: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
        let flo = f.apply(&lo);
        let fup = f.apply(&up);
        let bad = (0..d).any(|i| flo[i] > fup[i] + 1e-12 * fup[i].abs().max(1.0));
        if bad {
            report.monotonicity_violations.push((lo, up));
        }
    }
    report
}
