use mannfix::analysis::{classify_chain, exact_chain_value, StateClass};
use mannfix::experiments::{
    aggregate, final_means, generate_games, read_records_csv, run_chaotic_experiment,
    run_full_experiment, write_records_csv, ExperimentConfig, GeneratorConfig, Mode, RunRecord,
};
use mannfix::sampling::{sampling_validity_check, Sampler, SamplerState, StructuralPrior};
use mannfix::{Action, Player, Ssg, State};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("mannfix-pipeline-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn tiny_config() -> ExperimentConfig {
    ExperimentConfig {
        generator: GeneratorConfig {
            n_min_states: 3,
            n_max_states: 3,
            seed: 5,
            ..GeneratorConfig::default()
        },
        games: 3,
        seeds: vec![0, 1],
        full_steps: 40,
        chaotic_steps: 240,
        samples_per_step: 5,
        chaotic_record_every: 6,
        ..ExperimentConfig::default()
    }
}

#[test]
fn models_round_trip_through_json_files() {
    let dir = scratch("models");
    let games = generate_games(&tiny_config().generator, 2).unwrap();
    for g in &games {
        let path = dir.join(format!("g{}.json", g.id));
        g.game.save(&path).unwrap();
        assert_eq!(Ssg::load(&path).unwrap(), g.game);
        let sup = g.reference.iter().cloned().fold(0.0, f64::max);
        assert!((sup - 1.0).abs() < 1e-6, "reference value sup {sup}");
    }
}

#[test]
fn experiment_records_survive_csv_and_aggregate_consistently() {
    let cfg = tiny_config();
    let games = generate_games(&cfg.generator, cfg.games).unwrap();
    let schemes = cfg.scheme_specs().unwrap();
    let full = run_full_experiment(&games, &schemes, &cfg.seeds, &cfg.full_settings()).unwrap();
    let chaotic =
        run_chaotic_experiment(&games, &schemes, &cfg.seeds, &cfg.chaotic_settings()).unwrap();
    assert_eq!(full.len(), 3 * 6 * 2);
    assert_eq!(chaotic.len(), full.len());
    for c in &full {
        assert_eq!(c.observations, 40 * 5);
    }
    for c in &chaotic {
        assert_eq!(c.observations, 240);
        assert_eq!(c.component_updates, 240);
    }

    let records: Vec<RunRecord> = full
        .iter()
        .chain(&chaotic)
        .flat_map(|c| c.records.clone())
        .collect();
    let path = scratch("records").join("records.csv");
    write_records_csv(&path, &records).unwrap();
    assert_eq!(read_records_csv(&path).unwrap(), records);

    let stats = aggregate(&records).unwrap();
    for s in &stats {
        assert!(s.min <= s.p25 && s.p25 <= s.p75 && s.p75 <= s.max);
        assert!(s.min <= s.mean && s.mean <= s.max);
    }
    let finals = final_means(&stats);
    assert_eq!(finals.len(), 12);
    for scheme in ["S1", "S2", "S3", "S4", "S5", "S6"] {
        for mode in [Mode::Full, Mode::Chaotic] {
            let at_start = stats
                .iter()
                .find(|s| s.scheme == scheme && s.mode == mode && s.step == 0)
                .unwrap()
                .mean;
            assert!(
                finals[&(scheme.to_string(), mode)] < at_start,
                "{scheme} {mode} did not improve"
            );
        }
    }

    let again = run_full_experiment(&games, &schemes, &cfg.seeds, &cfg.full_settings()).unwrap();
    assert_eq!(format!("{again:?}"), format!("{full:?}"));
}

#[test]
fn sampler_state_resumes_from_sidecar() {
    let games = generate_games(&tiny_config().generator, 1).unwrap();
    let truth = &games[0].game;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut sampler = Sampler::new(truth);
    sampler.observe_batch(500, &mut rng).unwrap();
    let path = scratch("sidecar").join("counts.json");
    sampler.state().save(&path).unwrap();

    let prior = StructuralPrior::from_model(truth);
    let loaded = SamplerState::load(&path).unwrap();
    assert_eq!(&loaded, sampler.state());
    let resumed = Sampler::resume(truth, loaded).unwrap();
    assert_eq!(resumed.game(), sampler.game());
    assert!(sampling_validity_check(resumed.game(), &prior, truth).is_empty());
}

#[test]
fn chain_analysis_on_a_hand_built_chain() {
    let chain = Ssg::new(vec![
        State::new(
            Player::Max,
            vec![Action::new(1.0, vec![(1, 0.5), (2, 0.25)])],
        ),
        State::new(Player::Max, vec![Action::new(2.0, vec![(1, 0.5)])]),
        State::new(Player::Max, vec![Action::new(0.0, vec![(3, 1.0)])]),
        State::new(Player::Max, vec![Action::new(1.0, vec![(3, 1.0)])]),
    ])
    .unwrap();
    let classes = classify_chain(&chain).unwrap();
    assert_eq!(
        classes.labels,
        [
            StateClass::Infinite,
            StateClass::Finite,
            StateClass::Infinite,
            StateClass::Infinite
        ]
    );
    let v = exact_chain_value(&chain).unwrap().value;
    assert!((v[1] - 4.0).abs() < 1e-12);
    assert!(v[0].is_infinite() && v[2].is_infinite());
}
