//! End-to-end checks of the `proprank` binary: exit codes, file outputs,
//! and byte-identical reruns.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn proprank(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proprank"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_tiny_config(dir: &Path) -> String {
    let path = dir.join("config.toml");
    fs::write(
        &path,
        r#"
seed = 11

[dataset]
n_train = 60
n_validation = 30
n_test = 30
n_candidates = 8
feature_dim = 4

[learner]
c_grid = [1.0]
tau_grid = [1.0, 0.1]

[sweep]
n_clicks = [150]
etas = [0.0, 1.0]
eps_minus_values = [0.1]
assumed_etas = [0.0, 1.0]

[protocol]
prod_fraction = 0.05
n_seed_draws = 1

[swap]
swap_ranks = [1, 2, 3]
impressions_per_arm = 2000
"#,
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn simulate_train_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());

    let out = proprank(&["simulate", "--config", &config, "--out", "run"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("run/clicks.tsv").exists());
    assert!(dir.path().join("run/prod_model.txt").exists());

    let out = proprank(
        &[
            "train",
            "--config",
            &config,
            "--log",
            "run/clicks.tsv",
            "--method",
            "propensity",
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("run/model.txt").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("chosen_c="), "{stdout}");

    let out = proprank(
        &[
            "evaluate",
            "--config",
            &config,
            "--model",
            "run/model.txt",
            "--log",
            "run/clicks.tsv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("test_risk="), "{stdout}");
    assert!(stdout.contains("estimated_risk="), "{stdout}");
}

#[test]
fn learning_curve_reruns_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    for run in ["a", "b"] {
        let out = proprank(
            &[
                "learning-curve",
                "--config",
                &config,
                "--out",
                run,
                "--emit-gnuplot",
            ],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = fs::read(dir.path().join("a/learning_curve.csv")).unwrap();
    let b = fs::read(dir.path().join("b/learning_curve.csv")).unwrap();
    assert_eq!(a, b);
    assert!(dir.path().join("a/learning_curve.dat").exists());
}

#[test]
fn estimate_propensities_writes_model_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());
    let out = proprank(
        &["estimate-propensities", "--config", &config, "--out", "p"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("rank\tctr\tratio"), "{stdout}");
    let model = fs::read_to_string(dir.path().join("p/propensities.tsv")).unwrap();
    assert!(model.contains("rank\tp"), "{model}");
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();

    // invalid eta
    let config = write_tiny_config(dir.path());
    let out = proprank(
        &["simulate", "--config", &config, "--eta", "-1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));

    // malformed config file
    fs::write(dir.path().join("bad.toml"), "sweeep = nonsense").unwrap();
    let out = proprank(&["simulate", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));

    // unknown flag (usage error)
    let out = proprank(&["simulate", "--definitely-not-a-flag"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_tiny_config(dir.path());

    // evaluate with a missing model file
    let out = proprank(
        &["evaluate", "--config", &config, "--model", "nope.txt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // train on a malformed click log
    fs::write(dir.path().join("garbage.tsv"), "not a click log\n").unwrap();
    let out = proprank(
        &["train", "--config", &config, "--log", "garbage.tsv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn letor_directory_feeds_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    fs::create_dir_all(&corpus).unwrap();

    // tiny corpus: 8 queries per split, 5 docs each, 3 sparse features;
    // validation file deliberately omits feature 3 everywhere
    let mut make = |name: &str, qid_base: u64, max_idx: usize| {
        let mut text = String::new();
        for q in 0..8u64 {
            for d in 0..5 {
                let grade = if d == 0 { 4 } else { d % 3 };
                text.push_str(&format!("{grade} qid:{}", qid_base + q));
                for idx in 1..=max_idx {
                    let val = (d as f64 + 1.0) * 0.1 * idx as f64 * if q % 2 == 0 { 1.0 } else { -1.0 };
                    text.push_str(&format!(" {idx}:{val}"));
                }
                text.push_str(" # doc comment\n");
            }
        }
        fs::write(corpus.join(name), text).unwrap();
    };
    make("train.txt", 0, 3);
    make("vali.txt", 100, 2);
    make("test.txt", 200, 3);

    let config = dir.path().join("letor.toml");
    fs::write(
        &config,
        r#"
seed = 5
[learner]
c_grid = [1.0]
[sweep]
n_clicks = [60]
[protocol]
prod_fraction = 0.2
n_seed_draws = 1
"#,
    )
    .unwrap();

    let out = proprank(
        &[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--dataset",
            "corpus",
            "--out",
            "letor_run",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("letor_run/clicks.tsv").exists());
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = proprank(&["--help"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "simulate",
        "estimate-propensities",
        "train",
        "evaluate",
        "learning-curve",
        "bias-sweep",
        "noise-sweep",
        "misspec-sweep",
    ] {
        assert!(stdout.contains(sub), "missing subcommand {sub} in help");
    }
}
