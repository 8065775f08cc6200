mod common;

use approx::assert_abs_diff_eq;
use mannfix::analysis::{check_operator_properties, exact_ssg_value};
use mannfix::scheme::ALMOST_ONE;
use mannfix::{kleene_iterate, mann_step, Operator, Scheme, StoppingRule, ZeroBox};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_ssg, random_vector, Shape};

fn unit() -> impl Strategy<Value = f64> {
    0.0..ALMOST_ONE
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mann_step_stays_between_zero_and_the_segment(
        pts in prop::collection::vec((0.0..10.0f64, 0.0..10.0f64, unit(), unit()), 1..8)
    ) {
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let fx: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let alpha: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let beta: Vec<f64> = pts.iter().map(|p| p.3).collect();
        let y = mann_step(&x, &fx, &alpha, &beta).unwrap();
        for i in 0..x.len() {
            prop_assert!(y[i] >= 0.0);
            prop_assert!(y[i] <= x[i].max(fx[i]) + 1e-12);
        }
    }

    #[test]
    fn undampened_full_step_lands_on_the_image(x in prop::collection::vec(0.0..5.0f64, 1..6), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fx = random_vector(&mut rng, x.len(), 5.0);
        let ones = vec![1.0; x.len()];
        let zeros = vec![0.0; x.len()];
        let y = mann_step(&x, &fx, &ones, &zeros).unwrap();
        for (a, b) in y.iter().zip(&fx) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn bellman_operators_are_monotone_and_non_expansive(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_ssg(&mut rng, Shape::games(6, 3));
        let report = check_operator_properties(&g, &ZeroBox::orthant(g.num_states()), 50, seed);
        prop_assert!(report.is_monotone());
        prop_assert!(report.is_non_expansive(), "ratio {}", report.max_lipschitz_ratio);
    }

    #[test]
    fn value_is_a_fixpoint_of_the_bellman_operator(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_ssg(&mut rng, Shape::games(5, 2));
        let v = exact_ssg_value(&g, 1 << 20).unwrap().value;
        if v.iter().all(|x| x.is_finite()) {
            let fv = g.apply(&v);
            for (a, b) in v.iter().zip(&fv) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-8 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn scheme_values_are_proper_fractions(index in 1usize..=6, seed in any::<u64>(), n in 0usize..1_000_000) {
        let (a, b) = Scheme::standard(index, seed).unwrap().eval(n);
        prop_assert!((0.0..1.0).contains(&a));
        prop_assert!((0.0..1.0).contains(&b));
    }

    #[test]
    fn scheme_display_round_trips(c in 0.0..0.999f64, e in 0.01..3.0f64) {
        for text in [format!("alpha=const:{c},beta=harmonic"), format!("alpha=inv-pow:{e},beta=const:{c}")] {
            let s: Scheme = text.parse().unwrap();
            let again: Scheme = s.to_string().parse().unwrap();
            for n in [0, 1, 17, 1000] {
                prop_assert_eq!(s.eval(n), again.eval(n));
            }
        }
    }
}

#[test]
fn kleene_matches_enumeration_on_small_games() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..30 {
        let g = random_ssg(&mut rng, Shape::games(4, 2));
        let exact = exact_ssg_value(&g, 1 << 16).unwrap().value;
        let k = kleene_iterate(
            &g,
            &StoppingRule::steps(200_000).with_change_threshold(1e-13),
        )
        .unwrap();
        for (a, b) in exact.iter().zip(k.value.iter()) {
            if a.is_finite() && k.converged {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-6 * (1.0 + a.abs()));
            }
        }
    }
}
