#![allow(dead_code)]

use mannfix::{Action, Player, Ssg, State};
use rand::seq::index::sample;
use rand::Rng;

/// Shape of randomly drawn test games.
#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_states: usize,
    pub max_actions: usize,
    pub max_successors: usize,
    /// Probability that a state has no actions.
    pub final_probability: f64,
}

impl Shape {
    pub fn games(max_states: usize, max_actions: usize) -> Self {
        Self {
            max_states,
            max_actions,
            max_successors: 3,
            final_probability: 0.1,
        }
    }

    pub fn chains(max_states: usize) -> Self {
        Self::games(max_states, 1)
    }
}

/// Games with zero and positive rewards, sure and leaking actions, and
/// probabilities bounded away from 0.
pub fn random_ssg<R: Rng + ?Sized>(rng: &mut R, shape: Shape) -> Ssg {
    let d = rng.random_range(1..=shape.max_states);
    let states = (0..d)
        .map(|_| {
            let player = if rng.random_bool(0.5) {
                Player::Max
            } else {
                Player::Min
            };
            if rng.random_bool(shape.final_probability) {
                return State::new(player, Vec::new());
            }
            let k = rng.random_range(1..=shape.max_actions);
            let actions = (0..k)
                .map(|_| {
                    let m = rng.random_range(1..=shape.max_successors.min(d));
                    let succ = sample(rng, d, m).into_vec();
                    let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..1.0)).collect();
                    let total: f64 = w.iter().sum();
                    let keep = if rng.random_bool(0.5) {
                        1.0
                    } else {
                        1.0 - rng.random_range(0.05..0.5)
                    };
                    let reward = if rng.random_bool(0.3) {
                        0.0
                    } else {
                        rng.random_range(0.1..1.0)
                    };
                    Action::new(
                        reward,
                        succ.into_iter()
                            .zip(w)
                            .map(|(t, x)| (t, keep * x / total))
                            .collect(),
                    )
                })
                .collect();
            State::new(player, actions)
        })
        .collect();
    Ssg::new(states).expect("drawn games are valid")
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, d: usize, hi: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random::<f64>() * hi).collect()
}
