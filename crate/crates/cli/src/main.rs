use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mannfix::analysis::{classify_chain, exact_chain_value, exact_ssg_value, joint_policy_count};
use mannfix::experiments::{
    aggregate, generate_game, generate_games, run_chaotic_experiment, run_full_experiment,
    write_aggregate_csv, write_records_csv, write_state_errors_csv, ExperimentConfig,
    GeneratorConfig, RunRecord,
};
use mannfix::iteration::{ConstantProvider, Stride};
use mannfix::{
    chaotic_iterate, iterate, kleene_iterate, random_chaotic_iterate, IndexSets, Player, Policy,
    Scheme, Ssg, StoppingRule, Trajectory, VectorScheme,
};

#[derive(Parser)]
#[command(
    name = "mannfix",
    version,
    about = "Dampened Mann iteration on stochastic games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IterMode {
    Full,
    /// One component per step, round robin.
    Chaotic,
    /// One uniformly chosen component per step, with per-component counters.
    RandomChaotic,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolveMethod {
    Enum,
    Kleene,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExperimentMode {
    Full,
    Chaotic,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Run Mann iteration on the Bellman operator of a model.
    Iterate {
        #[arg(long)]
        model: PathBuf,
        /// `alpha=<family>,beta=<family>` or one of S1..S6.
        #[arg(long, default_value = "S2")]
        scheme: String,
        /// `zero` or a JSON file holding an array of numbers.
        #[arg(long, default_value = "zero")]
        x0: String,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        /// Stop once the error against the model's value drops below this.
        #[arg(long)]
        threshold: Option<f64>,
        /// Stop once a step changes the iterate by less than this.
        #[arg(long)]
        change_threshold: Option<f64>,
        #[arg(long, value_enum, default_value = "full")]
        mode: IterMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Policy budget for computing the reference value by enumeration.
        #[arg(long, default_value_t = 1_000_000)]
        budget: u128,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label the states of a Markov chain as zero, infinite or finite.
    Classify {
        #[arg(long)]
        model: PathBuf,
    },
    /// Compute the value of a model and print it as JSON.
    Solve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value = "enum")]
        method: SolveMethod,
        #[arg(long, default_value_t = 10_000_000)]
        budget: u128,
        #[arg(long, default_value_t = 10_000_000)]
        max_steps: usize,
        #[arg(long, default_value_t = 1e-12)]
        threshold: f64,
    },
    /// Run the sampled-game experiments and write CSV and JSON results.
    Experiment {
        /// JSON experiment configuration; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        mode: ExperimentMode,
        /// Use 50 games instead of the default 10.
        #[arg(long)]
        full_scale: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write randomly generated, normalized models.
    Generate {
        /// Generator or experiment configuration (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn load_model(path: &Path) -> Result<Ssg> {
    Ssg::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v > 0.0 {
        json!("inf")
    } else {
        Value::Null
    }
}

fn numbers(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| number(*x)).collect())
}

fn policy_json(p: &Policy) -> Value {
    json!(p.choices)
}

/// Greedy policies for a value vector, lowest action index on ties.
fn greedy(g: &Ssg, v: &[f64]) -> (Policy, Policy) {
    let mut pmin = Policy::empty(g.num_states());
    let mut pmax = Policy::empty(g.num_states());
    for (s, st) in g.states.iter().enumerate() {
        let q: Vec<f64> = st.actions.iter().map(|a| a.q_value(v)).collect();
        let Some(best) = q.iter().cloned().reduce(|a, b| {
            if st.player == Player::Max {
                a.max(b)
            } else {
                a.min(b)
            }
        }) else {
            continue;
        };
        let a = q.iter().position(|x| *x == best);
        match st.player {
            Player::Max => pmax.choices[s] = a,
            Player::Min => pmin.choices[s] = a,
        }
    }
    (pmin, pmax)
}

fn reference(g: &Ssg, budget: u128) -> Option<Vec<f64>> {
    if joint_policy_count(g) <= budget {
        if let Ok(v) = exact_ssg_value(g, budget) {
            return Some(v.value.0);
        }
    }
    mannfix::experiments::reference_value(g).map(|v| v.0)
}

fn read_x0(spec: &str, d: usize) -> Result<Vec<f64>> {
    if spec == "zero" {
        return Ok(vec![0.0; d]);
    }
    let text = fs::read_to_string(spec).with_context(|| format!("reading x0 file {spec}"))?;
    let x: Vec<f64> =
        serde_json::from_str(&text).with_context(|| format!("parsing x0 file {spec}"))?;
    if x.len() != d {
        bail!("x0 has {} entries, the model has {d} states", x.len());
    }
    Ok(x)
}

fn write_trajectory(path: &Path, t: &Trajectory) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["step", "error", "max_change", "alpha_min", "beta_min"])?;
    for r in &t.records {
        w.write_record([
            r.step.to_string(),
            r.error.map_or(String::new(), |e| e.to_string()),
            r.max_change.to_string(),
            r.alpha_min.to_string(),
            r.beta_min.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_iterate(
    model: &Path,
    scheme: &str,
    x0: &str,
    max_steps: usize,
    threshold: Option<f64>,
    change_threshold: Option<f64>,
    mode: IterMode,
    seed: u64,
    budget: u128,
    out: &Path,
) -> Result<()> {
    let g = load_model(model)?;
    let d = g.num_states();
    let scheme: Scheme = scheme
        .parse()
        .with_context(|| format!("parsing scheme {scheme:?}"))?;
    let x0 = read_x0(x0, d)?;
    let reference = reference(&g, budget);
    if threshold.is_some() && reference.is_none() {
        bail!("--threshold needs the model's value, which could not be computed");
    }
    let mut stop = StoppingRule::steps(max_steps).with_stride(Stride::final_only());
    if let Some(t) = threshold {
        stop = stop.with_error_threshold(t);
    }
    if let Some(t) = change_threshold {
        stop = stop.with_change_threshold(t);
    }
    let mut p = ConstantProvider::unbounded(&g);
    let r = reference.as_deref();
    let t = match mode {
        IterMode::Full => iterate(&mut p, &scheme, &x0, &stop, r)?,
        IterMode::Chaotic => {
            let mut vs = VectorScheme::replicated(scheme, d);
            chaotic_iterate(&mut p, &mut vs, &IndexSets::round_robin(d), &x0, &stop, r)?
        }
        IterMode::RandomChaotic => random_chaotic_iterate(&mut p, &scheme, seed, &x0, &stop, r)?,
    };
    write_trajectory(out, &t)?;
    let summary = json!({
        "steps": t.steps(),
        "termination": format!("{:?}", t.termination),
        "final_error": t.final_error().map(number),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_classify(model: &Path) -> Result<()> {
    let g = load_model(model)?;
    let c = classify_chain(&g)?;
    let v = exact_chain_value(&g)?;
    println!("state,class,value");
    for (s, label) in c.labels.iter().enumerate() {
        let class = serde_json::to_value(label)?;
        println!("{s},{},{}", class.as_str().unwrap_or_default(), v.value[s]);
    }
    Ok(())
}

fn cmd_solve(
    model: &Path,
    method: SolveMethod,
    budget: u128,
    max_steps: usize,
    threshold: f64,
) -> Result<()> {
    let g = load_model(model)?;
    let out = match method {
        SolveMethod::Enum => {
            let v = exact_ssg_value(&g, budget)?;
            let (pmin, pmax) = v.witness.expect("enumeration returns a witness");
            json!({
                "method": "enum",
                "value": numbers(&v.value),
                "witness": { "min": policy_json(&pmin), "max": policy_json(&pmax) },
            })
        }
        SolveMethod::Kleene => {
            let r = kleene_iterate(
                &g,
                &StoppingRule::steps(max_steps).with_change_threshold(threshold),
            )?;
            let (pmin, pmax) = greedy(&g, &r.value);
            json!({
                "method": "kleene",
                "value": numbers(&r.value),
                "converged": r.converged,
                "steps": r.steps,
                "witness": { "min": policy_json(&pmin), "max": policy_json(&pmax) },
            })
        }
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn load_experiment_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => {
            ExperimentConfig::load(p).with_context(|| format!("loading config {}", p.display()))
        }
        None => Ok(ExperimentConfig::default()),
    }
}

fn cmd_experiment(
    config: Option<&Path>,
    mode: ExperimentMode,
    full_scale: bool,
    out_dir: &Path,
) -> Result<()> {
    let mut cfg = load_experiment_config(config)?;
    if full_scale {
        cfg.games = ExperimentConfig::full_scale().games;
    }
    fs::create_dir_all(out_dir)?;
    let games = generate_games(&cfg.generator, cfg.games)?;
    let schemes = cfg.scheme_specs()?;
    let mut cells = Vec::new();
    if mode != ExperimentMode::Chaotic {
        cells.extend(run_full_experiment(
            &games,
            &schemes,
            &cfg.seeds,
            &cfg.full_settings(),
        )?);
    }
    if mode != ExperimentMode::Full {
        cells.extend(run_chaotic_experiment(
            &games,
            &schemes,
            &cfg.seeds,
            &cfg.chaotic_settings(),
        )?);
    }
    let records: Vec<RunRecord> = cells
        .iter()
        .flat_map(|c| c.records.iter().cloned())
        .collect();
    write_records_csv(out_dir.join("records.csv"), &records)?;
    write_aggregate_csv(out_dir.join("aggregate.csv"), &aggregate(&records)?)?;
    if cfg.per_state_errors {
        let per_state: Vec<_> = cells
            .iter()
            .flat_map(|c| c.state_errors.iter().cloned())
            .collect();
        write_state_errors_csv(out_dir.join("state_errors.csv"), &per_state)?;
    }
    let meta = json!({
        "config": cfg,
        "mode": match mode { ExperimentMode::Full => "full", ExperimentMode::Chaotic => "chaotic", ExperimentMode::Both => "both" },
        "seeds": cfg.seeds,
        "generator": cfg.generator,
        "games": games.iter().map(|g| json!({ "id": g.id, "states": g.game.num_states(), "pairs": g.game.num_pairs() })).collect::<Vec<_>>(),
        "resources": cells.iter().map(|c| json!({
            "game_id": c.records[0].game_id,
            "scheme": c.records[0].scheme,
            "mode": c.records[0].mode,
            "seed": c.records[0].seed,
            "observations": c.observations,
            "component_updates": c.component_updates,
        })).collect::<Vec<_>>(),
        "error_metric": "sup-norm",
        "versions": { "mannfix": env!("CARGO_PKG_VERSION") },
    });
    fs::write(
        out_dir.join("meta.json"),
        serde_json::to_string_pretty(&meta)?,
    )?;
    println!(
        "wrote {} records for {} games to {}",
        records.len(),
        games.len(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_generate(config: Option<&Path>, count: usize, out_dir: &Path) -> Result<()> {
    let cfg = match config {
        None => GeneratorConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let raw: Value = serde_json::from_str(&text)?;
            if raw.get("generator").is_some() {
                serde_json::from_value::<ExperimentConfig>(raw)?.generator
            } else {
                serde_json::from_value(raw)?
            }
        }
    };
    fs::create_dir_all(out_dir)?;
    for i in 0..count {
        let g = generate_game(&cfg, i)?;
        g.save(out_dir.join(format!("game_{i:03}.json")))?;
    }
    println!("wrote {count} models to {}", out_dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Iterate {
            model,
            scheme,
            x0,
            max_steps,
            threshold,
            change_threshold,
            mode,
            seed,
            budget,
            out,
        } => cmd_iterate(
            &model,
            &scheme,
            &x0,
            max_steps,
            threshold,
            change_threshold,
            mode,
            seed,
            budget,
            &out,
        ),
        Command::Classify { model } => cmd_classify(&model),
        Command::Solve {
            model,
            method,
            budget,
            max_steps,
            threshold,
        } => cmd_solve(&model, method, budget, max_steps, threshold),
        Command::Experiment {
            config,
            mode,
            full_scale,
            out_dir,
        } => cmd_experiment(config.as_deref(), mode, full_scale, &out_dir),
        Command::Generate {
            config,
            count,
            out_dir,
        } => cmd_generate(config.as_deref(), count, &out_dir),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
