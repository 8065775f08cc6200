use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mannfix"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mannfix-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

const CHAIN: &str = r#"{"states":[
  {"player":"max","actions":[{"reward":1.0,"transitions":[[0,0.5]]}]},
  {"player":"max","actions":[{"reward":1.0,"transitions":[[1,1.0]]}]},
  {"player":"min","actions":[{"reward":0.0,"transitions":[[2,1.0]]}]}
]}"#;

const GAME: &str = r#"{"states":[
  {"player":"max","actions":[{"reward":1.0,"transitions":[]},{"reward":0.5,"transitions":[[1,0.9]]}]},
  {"player":"min","actions":[{"reward":2.0,"transitions":[]},{"reward":0.25,"transitions":[[0,0.5]]}]}
]}"#;

#[test]
fn classify_prints_labels_and_values() {
    let dir = scratch("classify");
    fs::write(dir.join("m.json"), CHAIN).unwrap();
    let out = run(bin().args(["classify", "--model"]).arg(dir.join("m.json")));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text,
        "state,class,value\n0,finite,2\n1,infinite,inf\n2,zero,0\n"
    );
}

#[test]
fn solve_methods_agree() {
    let dir = scratch("solve");
    fs::write(dir.join("g.json"), GAME).unwrap();
    let parse = |out: Output| -> serde_json::Value { serde_json::from_slice(&out.stdout).unwrap() };
    let e = parse(run(bin()
        .args(["solve", "--method", "enum", "--model"])
        .arg(dir.join("g.json"))));
    let k = parse(run(bin()
        .args(["solve", "--method", "kleene", "--model"])
        .arg(dir.join("g.json"))));
    assert_eq!(k["converged"], true);
    for s in 0..2 {
        let (a, b) = (
            e["value"][s].as_f64().unwrap(),
            k["value"][s].as_f64().unwrap(),
        );
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
    assert_eq!(e["witness"], k["witness"]);
    assert_eq!(e["witness"]["max"][1], serde_json::Value::Null);
}

#[test]
fn invalid_models_report_paths() {
    let dir = scratch("invalid");
    fs::write(
        dir.join("bad.json"),
        r#"{"states":[{"player":"max","actions":[{"reward":1.0,"transitions":[[4,0.5]]}]}]}"#,
    )
    .unwrap();
    let out = bin()
        .args(["solve", "--model"])
        .arg(dir.join("bad.json"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("states[0].actions[0].transitions"), "{err}");
}

#[test]
fn iterate_writes_csv() {
    let dir = scratch("iterate");
    fs::write(dir.join("g.json"), GAME).unwrap();
    fs::write(dir.join("x0.json"), "[2.0, 2.0]").unwrap();
    for mode in ["full", "chaotic", "random-chaotic"] {
        let csv = dir.join(format!("{mode}.csv"));
        run(bin()
            .args([
                "iterate",
                "--scheme",
                "S2",
                "--max-steps",
                "50",
                "--mode",
                mode,
                "--seed",
                "3",
                "--model",
            ])
            .arg(dir.join("g.json"))
            .arg("--x0")
            .arg(dir.join("x0.json"))
            .arg("--out")
            .arg(&csv));
        let text = fs::read_to_string(&csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("step,error,max_change,alpha_min,beta_min")
        );
        assert_eq!(lines.count(), 51);
    }
    let csv = dir.join("threshold.csv");
    let out = run(bin()
        .args([
            "iterate",
            "--scheme",
            "alpha=const:0.5,beta=harmonic",
            "--threshold",
            "1e-3",
            "--max-steps",
            "100000",
            "--model",
        ])
        .arg(dir.join("g.json"))
        .arg("--out")
        .arg(&csv));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["termination"], "ErrorBelowThreshold");
    assert!(summary["final_error"].as_f64().unwrap() < 1e-3);
}

#[test]
fn iterate_rejects_bad_scheme() {
    let dir = scratch("badscheme");
    fs::write(dir.join("g.json"), GAME).unwrap();
    let out = bin()
        .args([
            "iterate",
            "--scheme",
            "alpha=const:1.5,beta=harmonic",
            "--model",
        ])
        .arg(dir.join("g.json"))
        .arg("--out")
        .arg(dir.join("o.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn generate_and_experiment() {
    let dir = scratch("experiment");
    let config = r#"{
      "generator": {"n_min_states": 2, "n_max_states": 2, "max_actions": 2, "seed": 9},
      "games": 2, "schemes": ["S1", "S2"], "seeds": [0, 1],
      "full_steps": 20, "chaotic_steps": 80, "samples_per_step": 4, "chaotic_record_every": 4
    }"#;
    fs::write(dir.join("cfg.json"), config).unwrap();
    run(bin()
        .args(["generate", "--count", "3", "--config"])
        .arg(dir.join("cfg.json"))
        .arg("--out-dir")
        .arg(dir.join("models")));
    for i in 0..3 {
        let text = fs::read_to_string(dir.join(format!("models/game_{i:03}.json"))).unwrap();
        let g: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(g["states"].as_array().unwrap().len(), 4);
    }

    let out = dir.join("out");
    run(bin()
        .args(["experiment", "--mode", "both", "--config"])
        .arg(dir.join("cfg.json"))
        .arg("--out-dir")
        .arg(&out));
    let records = fs::read_to_string(out.join("records.csv")).unwrap();
    assert!(records.starts_with("game_id,scheme,mode,seed,step,error\n"));
    // 2 games x 2 schemes x 2 seeds x (21 full + 21 chaotic records)
    assert_eq!(records.lines().count() - 1, 8 * 42);
    let agg = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert!(agg.starts_with("scheme,mode,step,mean,p25,p75,min,max\n"));
    assert_eq!(agg.lines().count() - 1, 2 * 42);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["games"], 2);
    assert_eq!(meta["resources"][0]["observations"], 80);
    assert_eq!(meta["resources"][0]["component_updates"], 80);

    assert!(!out.join("state_errors.csv").exists());

    let detailed = config.replace(r#""games": 2"#, r#""games": 1, "per_state_errors": true"#);
    fs::write(dir.join("detailed.json"), detailed).unwrap();
    let out2 = dir.join("detailed");
    run(bin()
        .args(["experiment", "--mode", "full", "--config"])
        .arg(dir.join("detailed.json"))
        .arg("--out-dir")
        .arg(&out2));
    let per_state = fs::read_to_string(out2.join("state_errors.csv")).unwrap();
    assert!(per_state.starts_with("game_id,scheme,mode,seed,step,state,error\n"));
    // 1 game x 2 schemes x 2 seeds x 21 steps x 4 states
    assert_eq!(per_state.lines().count() - 1, 4 * 21 * 4);

    let again = dir.join("again");
    run(bin()
        .args(["experiment", "--mode", "both", "--config"])
        .arg(dir.join("cfg.json"))
        .arg("--out-dir")
        .arg(&again));
    assert_eq!(
        records,
        fs::read_to_string(again.join("records.csv")).unwrap()
    );
}
