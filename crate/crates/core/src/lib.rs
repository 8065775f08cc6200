//! Least-fixpoint approximation for monotone, non-expansive maps on
//! non-negative real vectors via dampened Mann iteration.
//!
//! The crate is organised bottom-up:
//!
//! * [`value`]: vectors, boxes and the [`value::Operator`] trait.
//! * [`scheme`]: learning-rate / dampening-factor sequences, vector and
//!   chaotic derivations, diagnostics and scheme synthesis.
//! * [`iteration`]: the Mann update and its full, chaotic and
//!   random-chaotic drivers, plus Kleene iteration.
//! * [`models`]: simple stochastic games and their Bellman operators.
//! * [`analysis`]: exact values (chain solve, policy enumeration) and
//!   empirical operator checks.
//! * [`sampling`]: count-based empirical games that respect the true
//!   model's structure.
//! * [`experiments`]: random game generation and the benchmark runners.

pub mod analysis;
pub mod experiments;
pub mod iteration;
pub mod models;
pub mod sampling;
pub mod scheme;
pub mod value;

pub use iteration::{
    chaotic_iterate, clamp_extend, iterate, iterate_vector, kleene_iterate, mann_step,
    random_chaotic_iterate, StoppingRule, Termination, Trajectory,
};
pub use models::{Action, Player, Policy, Ssg, State, StateActionIndex};
pub use scheme::{Family, IndexSets, Scheme, VectorScheme};
pub use value::{FnOperator, Operator, ValueVector, ZeroBox};
