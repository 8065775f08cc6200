//! Random game generation, sampled-iteration experiments and aggregation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::iteration::{
    iterate, kleene_iterate, random_chaotic_iterate, FnProvider, IterationError, StoppingRule,
    Stride, Trajectory,
};
use crate::models::{Action, Player, Ssg, State};
use crate::sampling::{Sampler, SamplingError};
use crate::scheme::{Scheme, SchemeError};
use crate::value::{Operator, ValueVector, ZeroBox};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no game accepted after {attempts} attempts ({stats})")]
    RejectionCap {
        attempts: usize,
        stats: RejectionStats,
    },
    #[error("no records to aggregate")]
    Empty,
    #[error("game {0} has no finite reference value")]
    Reference(usize),
    #[error(transparent)]
    Iteration(#[from] IterationError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RejectionStats {
    pub kleene_not_converged: usize,
    pub zero_value: usize,
    pub normalization_failed: usize,
}

impl fmt::Display for RejectionStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "kleene not converged: {}, zero value: {}, normalization failed: {}",
            self.kleene_not_converged, self.zero_value, self.normalization_failed
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Number of MIN-owned states.
    pub n_min_states: usize,
    /// Number of MAX-owned states.
    pub n_max_states: usize,
    pub max_actions: usize,
    pub max_successors: usize,
    /// Probability that an action keeps a termination mass, drawn
    /// uniformly from `(0, 0.5]`.
    pub termination_probability: f64,
    pub reward_max: f64,
    pub kleene_budget: usize,
    pub kleene_threshold: f64,
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_min_states: 15,
            n_max_states: 15,
            max_actions: 5,
            max_successors: 3,
            termination_probability: 0.5,
            reward_max: 1.0,
            kleene_budget: 10_000,
            kleene_threshold: 1e-8,
            max_attempts: 10_000,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.n_min_states + self.n_max_states == 0 {
            return bad("at least one state is required");
        }
        if self.max_actions == 0 || self.max_successors == 0 {
            return bad("max_actions and max_successors must be positive");
        }
        if !(0.0..=1.0).contains(&self.termination_probability) {
            return bad("termination_probability must lie in [0, 1]");
        }
        if !(self.reward_max > 0.0 && self.reward_max.is_finite()) {
            return bad("reward_max must be positive");
        }
        if self.kleene_budget == 0 || self.max_attempts == 0 {
            return bad("kleene_budget and max_attempts must be positive");
        }
        if !(self.kleene_threshold > 0.0) {
            return bad("kleene_threshold must be positive");
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.n_min_states + self.n_max_states
    }
}

/// Target of the value normalisation.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

fn draw_structure<R: Rng + ?Sized>(cfg: &GeneratorConfig, rng: &mut R) -> Ssg {
    let d = cfg.num_states();
    let players = std::iter::repeat_n(Player::Max, cfg.n_max_states)
        .chain(std::iter::repeat_n(Player::Min, cfg.n_min_states));
    let states = players
        .map(|player| {
            let k = rng.random_range(1..=cfg.max_actions);
            let actions = (0..k)
                .map(|_| {
                    let m = rng.random_range(1..=cfg.max_successors.min(d));
                    let succ = sample(rng, d, m).into_vec();
                    let w: Vec<f64> = (0..m)
                        .map(|_| rng.random::<f64>() + f64::MIN_POSITIVE)
                        .collect();
                    let total: f64 = w.iter().sum();
                    let keep = if rng.random_bool(cfg.termination_probability) {
                        1.0 - 0.5 * (1.0 - rng.random::<f64>())
                    } else {
                        1.0
                    };
                    let mut transitions: Vec<(usize, f64)> = succ
                        .into_iter()
                        .zip(w)
                        .map(|(t, x)| (t, keep * x / total))
                        .collect();
                    transitions.sort_by_key(|(t, _)| *t);
                    Action::new(rng.random::<f64>() * cfg.reward_max, transitions)
                })
                .collect();
            State::new(player, actions)
        })
        .collect();
    Ssg { states }
}

/// Reference fixpoint: Kleene iteration to a change below `1e-12`.
pub fn reference_value(g: &Ssg) -> Option<ValueVector> {
    let r = kleene_iterate(
        g,
        &StoppingRule::steps(10_000_000).with_change_threshold(1e-12),
    )
    .ok()?;
    r.converged.then_some(r.value)
}

/// Draws games until one passes the Kleene filter; rescales its rewards so
/// that its value has sup norm 1.
pub fn generate_random_ssg<R: Rng + ?Sized>(
    cfg: &GeneratorConfig,
    rng: &mut R,
) -> Result<Ssg, ExperimentError> {
    cfg.validate()?;
    let mut stats = RejectionStats::default();
    let filter = StoppingRule::steps(cfg.kleene_budget).with_change_threshold(cfg.kleene_threshold);
    for _ in 0..cfg.max_attempts {
        let mut g = draw_structure(cfg, rng);
        if !kleene_iterate(&g, &filter)?.converged {
            stats.kleene_not_converged += 1;
            continue;
        }
        let Some(v) = reference_value(&g) else {
            stats.kleene_not_converged += 1;
            continue;
        };
        let norm = v.sup_norm();
        if norm <= 0.0 {
            stats.zero_value += 1;
            continue;
        }
        g.scale_rewards(1.0 / norm);
        match reference_value(&g) {
            Some(w) if (w.sup_norm() - 1.0).abs() <= NORMALIZATION_TOLERANCE => {
                return Ok(Ssg::new(g.states).expect("generated games are valid"));
            }
            _ => stats.normalization_failed += 1,
        }
    }
    Err(ExperimentError::RejectionCap {
        attempts: cfg.max_attempts,
        stats,
    })
}

/// Game `i` of the population seeded by `cfg.seed`.
pub fn generate_game(cfg: &GeneratorConfig, i: usize) -> Result<Ssg, ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(i as u64);
    generate_random_ssg(cfg, &mut rng)
}

/// A game together with its reference value.
#[derive(Clone, Debug)]
pub struct PreparedGame {
    pub id: usize,
    pub game: Ssg,
    pub reference: ValueVector,
}

impl PreparedGame {
    pub fn new(id: usize, game: Ssg) -> Result<Self, ExperimentError> {
        let reference = reference_value(&game).ok_or(ExperimentError::Reference(id))?;
        Ok(Self {
            id,
            game,
            reference,
        })
    }
}

pub fn generate_games(
    cfg: &GeneratorConfig,
    count: usize,
) -> Result<Vec<PreparedGame>, ExperimentError> {
    (0..count)
        .map(|i| PreparedGame::new(i, generate_game(cfg, i)?))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Full,
    Chaotic,
    RandomChaotic,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::Chaotic => "chaotic",
            Mode::RandomChaotic => "random-chaotic",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialValue {
    #[default]
    Zero,
    /// Uniform in `[0, 2]^d`.
    Random,
}

/// A named scheme; `S1`..`S6` take the run seed for their random part.
#[derive(Clone, Debug)]
pub struct SchemeSpec {
    pub name: String,
    template: Option<Scheme>,
}

impl SchemeSpec {
    pub fn parse(name: &str) -> Result<Self, SchemeError> {
        let table = name
            .strip_prefix('S')
            .and_then(|i| i.parse::<usize>().ok())
            .filter(|i| (1..=6).contains(i));
        Ok(Self {
            name: name.to_string(),
            template: match table {
                Some(_) => None,
                None => Some(name.parse()?),
            },
        })
    }

    pub fn standard() -> Vec<Self> {
        (1..=6)
            .map(|i| Self::parse(&format!("S{i}")).expect("table names parse"))
            .collect()
    }

    pub fn instantiate(&self, seed: u64) -> Scheme {
        match &self.template {
            Some(s) => s.clone(),
            None => Scheme::standard(self.name[1..].parse().expect("checked on parse"), seed)
                .expect("checked on parse"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub game_id: usize,
    pub scheme: String,
    pub mode: Mode,
    pub seed: u64,
    pub step: usize,
    pub error: f64,
}

/// Error of a single state, `|x_n(s) - value(s)|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateErrorRecord {
    pub game_id: usize,
    pub scheme: String,
    pub mode: Mode,
    pub seed: u64,
    pub step: usize,
    pub state: usize,
    pub error: f64,
}

/// Outcome of one (game, scheme, seed) cell.
#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub records: Vec<RunRecord>,
    /// Empty unless [`RunSettings::per_state`] is set.
    pub state_errors: Vec<StateErrorRecord>,
    pub observations: u64,
    pub component_updates: u64,
}

fn cell_rng(seed: u64, game: usize, salt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(game as u64);
    rng
}

fn initial_value(mode: InitialValue, d: usize, seed: u64, game: usize) -> Vec<f64> {
    match mode {
        InitialValue::Zero => vec![0.0; d],
        InitialValue::Random => {
            let mut rng = cell_rng(seed, game, 3);
            (0..d).map(|_| 2.0 * rng.random::<f64>()).collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSettings {
    pub steps: usize,
    /// Observations before each full step.
    pub samples_per_step: usize,
    /// Error records are kept every `record_every` steps (and at the end).
    pub record_every: usize,
    pub x0: InitialValue,
    /// Also keep per-state errors at the recorded steps.
    pub per_state: bool,
}

impl RunSettings {
    fn stride(&self) -> Stride {
        if self.per_state {
            Stride {
                dense_until: 0,
                every: self.record_every.max(1),
            }
        } else {
            Stride::final_only()
        }
    }
}

/// One full-update run: before every step, `samples_per_step` observations
/// refine the empirical game, whose Bellman operator is then used for one
/// Mann step on all components.
pub fn run_full_cell(
    game: &PreparedGame,
    scheme: &SchemeSpec,
    seed: u64,
    settings: &RunSettings,
) -> Result<CellOutcome, ExperimentError> {
    let d = game.game.num_states();
    let mut sampler = Sampler::new(&game.game);
    let mut rng = cell_rng(seed, game.id, 1);
    let mut sampling_error = None;
    let mut provider = FnProvider::new(ZeroBox::orthant(d), |_, x: &[f64], out: &mut [f64]| {
        if let Err(e) = sampler.observe_batch(settings.samples_per_step, &mut rng) {
            sampling_error.get_or_insert(e);
        }
        sampler.game().apply_into(x, out);
    });
    let x0 = initial_value(settings.x0, d, seed, game.id);
    let traj = iterate(
        &mut provider,
        &scheme.instantiate(seed),
        &x0,
        &StoppingRule::steps(settings.steps).with_stride(settings.stride()),
        Some(&game.reference),
    )?;
    if let Some(e) = sampling_error {
        return Err(e.into());
    }
    Ok(CellOutcome {
        records: to_records(
            &traj.records,
            game.id,
            &scheme.name,
            Mode::Full,
            seed,
            settings.record_every,
        ),
        state_errors: to_state_errors(&traj, game, &scheme.name, Mode::Full, seed, settings),
        observations: sampler.state().total_observations(),
        component_updates: traj.component_updates,
    })
}

/// One chaotic run: before every step a single observation is made, then
/// one uniformly chosen state is updated using its own step counter.
pub fn run_chaotic_cell(
    game: &PreparedGame,
    scheme: &SchemeSpec,
    seed: u64,
    settings: &RunSettings,
) -> Result<CellOutcome, ExperimentError> {
    let d = game.game.num_states();
    let mut sampler = Sampler::new(&game.game);
    let mut rng = cell_rng(seed, game.id, 1);
    let mut sampling_error = None;
    let mut provider = FnProvider::new(ZeroBox::orthant(d), |_, x: &[f64], out: &mut [f64]| {
        if let Err(e) = sampler.observe_batch(1, &mut rng) {
            sampling_error.get_or_insert(e);
        }
        sampler.game().apply_into(x, out);
    });
    let x0 = initial_value(settings.x0, d, seed, game.id);
    let selector = seed ^ ((game.id as u64) << 32) ^ 0x5EED;
    let traj = random_chaotic_iterate(
        &mut provider,
        &scheme.instantiate(seed),
        selector,
        &x0,
        &StoppingRule::steps(settings.steps).with_stride(settings.stride()),
        Some(&game.reference),
    )?;
    if let Some(e) = sampling_error {
        return Err(e.into());
    }
    Ok(CellOutcome {
        records: to_records(
            &traj.records,
            game.id,
            &scheme.name,
            Mode::Chaotic,
            seed,
            settings.record_every,
        ),
        state_errors: to_state_errors(&traj, game, &scheme.name, Mode::Chaotic, seed, settings),
        observations: sampler.state().total_observations(),
        component_updates: traj.component_updates,
    })
}

fn to_records(
    steps: &[crate::iteration::StepRecord],
    game_id: usize,
    scheme: &str,
    mode: Mode,
    seed: u64,
    every: usize,
) -> Vec<RunRecord> {
    let every = every.max(1);
    let last = steps.last().map_or(0, |r| r.step);
    steps
        .iter()
        .filter(|r| r.step % every == 0 || r.step == last)
        .map(|r| RunRecord {
            game_id,
            scheme: scheme.to_string(),
            mode,
            seed,
            step: r.step,
            error: r.error.unwrap_or(f64::NAN),
        })
        .collect()
}

fn to_state_errors(
    traj: &Trajectory,
    game: &PreparedGame,
    scheme: &str,
    mode: Mode,
    seed: u64,
    settings: &RunSettings,
) -> Vec<StateErrorRecord> {
    if !settings.per_state {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (step, x) in &traj.iterates {
        for (state, (a, b)) in x.iter().zip(game.reference.iter()).enumerate() {
            out.push(StateErrorRecord {
                game_id: game.id,
                scheme: scheme.to_string(),
                mode,
                seed,
                step: *step,
                state,
                error: (a - b).abs(),
            });
        }
    }
    out
}

type Cell<'a> = (&'a PreparedGame, &'a SchemeSpec, u64);

fn run_cells<F>(cells: Vec<Cell<'_>>, run: F) -> Result<Vec<CellOutcome>, ExperimentError>
where
    F: Fn(&PreparedGame, &SchemeSpec, u64) -> Result<CellOutcome, ExperimentError> + Sync,
{
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(cells.len().max(1));
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<CellOutcome, ExperimentError>>> =
        (0..cells.len()).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(&(g, s, seed)) = cells.get(i) else {
                    break;
                };
                let out = run(g, s, seed);
                results
                    .lock()
                    .expect("no worker panics while holding the lock")[i] = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect()
}

fn cells<'a>(games: &'a [PreparedGame], schemes: &'a [SchemeSpec], seeds: &[u64]) -> Vec<Cell<'a>> {
    let mut out = Vec::new();
    for g in games {
        for s in schemes {
            for &seed in seeds {
                out.push((g, s, seed));
            }
        }
    }
    out
}

/// Runs every (game, scheme, seed) cell with full updates. Cells run in
/// parallel; the output order is fixed.
pub fn run_full_experiment(
    games: &[PreparedGame],
    schemes: &[SchemeSpec],
    seeds: &[u64],
    settings: &RunSettings,
) -> Result<Vec<CellOutcome>, ExperimentError> {
    run_cells(cells(games, schemes, seeds), |g, s, seed| {
        run_full_cell(g, s, seed, settings)
    })
}

pub fn run_chaotic_experiment(
    games: &[PreparedGame],
    schemes: &[SchemeSpec],
    seeds: &[u64],
    settings: &RunSettings,
) -> Result<Vec<CellOutcome>, ExperimentError> {
    run_cells(cells(games, schemes, seeds), |g, s, seed| {
        run_chaotic_cell(g, s, seed, settings)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub scheme: String,
    pub mode: Mode,
    pub step: usize,
    pub mean: f64,
    pub p25: f64,
    pub p75: f64,
    pub min: f64,
    pub max: f64,
}

/// Nearest-rank percentile of sorted data.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Per (scheme, mode, step) statistics over games and seeds.
pub fn aggregate(records: &[RunRecord]) -> Result<Vec<AggregateStats>, ExperimentError> {
    if records.is_empty() {
        return Err(ExperimentError::Empty);
    }
    let mut groups: BTreeMap<(&str, Mode, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups
            .entry((&r.scheme, r.mode, r.step))
            .or_default()
            .push(r.error);
    }
    Ok(groups
        .into_iter()
        .map(|((scheme, mode, step), mut v)| {
            v.sort_by(f64::total_cmp);
            AggregateStats {
                scheme: scheme.to_string(),
                mode,
                step,
                mean: v.iter().sum::<f64>() / v.len() as f64,
                p25: nearest_rank(&v, 25.0),
                p75: nearest_rank(&v, 75.0),
                min: v[0],
                max: v[v.len() - 1],
            }
        })
        .collect())
}

/// Mean error of the last recorded step per (scheme, mode).
pub fn final_means(stats: &[AggregateStats]) -> BTreeMap<(String, Mode), f64> {
    let mut out: BTreeMap<(String, Mode), (usize, f64)> = BTreeMap::new();
    for s in stats {
        let e = out
            .entry((s.scheme.clone(), s.mode))
            .or_insert((s.step, s.mean));
        if s.step >= e.0 {
            *e = (s.step, s.mean);
        }
    }
    out.into_iter().map(|(k, (_, m))| (k, m)).collect()
}

/// Experiment configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    pub games: usize,
    pub schemes: Vec<String>,
    pub seeds: Vec<u64>,
    pub full_steps: usize,
    pub chaotic_steps: usize,
    pub samples_per_step: usize,
    pub chaotic_record_every: usize,
    pub x0: InitialValue,
    pub per_state_errors: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorConfig::default(),
            games: 10,
            schemes: (1..=6).map(|i| format!("S{i}")).collect(),
            seeds: vec![0],
            full_steps: 1000,
            chaotic_steps: 30_000,
            samples_per_step: 30,
            chaotic_record_every: 30,
            x0: InitialValue::Zero,
            per_state_errors: false,
        }
    }
}

impl ExperimentConfig {
    /// The 50-game population.
    pub fn full_scale() -> Self {
        Self {
            games: 50,
            ..Self::default()
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn scheme_specs(&self) -> Result<Vec<SchemeSpec>, ExperimentError> {
        Ok(self
            .schemes
            .iter()
            .map(|s| SchemeSpec::parse(s))
            .collect::<Result<_, _>>()?)
    }

    pub fn full_settings(&self) -> RunSettings {
        RunSettings {
            steps: self.full_steps,
            samples_per_step: self.samples_per_step,
            record_every: 1,
            x0: self.x0,
            per_state: self.per_state_errors,
        }
    }

    pub fn chaotic_settings(&self) -> RunSettings {
        RunSettings {
            steps: self.chaotic_steps,
            samples_per_step: 1,
            record_every: self.chaotic_record_every,
            x0: self.x0,
            per_state: self.per_state_errors,
        }
    }
}

pub fn write_records_csv(
    path: impl AsRef<Path>,
    records: &[RunRecord],
) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv(
    path: impl AsRef<Path>,
    stats: &[AggregateStats],
) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    for s in stats {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_state_errors_csv(
    path: impl AsRef<Path>,
    records: &[StateErrorRecord],
) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<RunRecord>, ExperimentError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
