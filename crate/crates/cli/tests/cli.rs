use std::path::Path;
use std::process::{Command, Output};

fn ecosim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecosim"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("ECOSIM_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

const CSVS: [&str; 7] = [
    "fig4_provider_reward.csv",
    "fig5_pareto.csv",
    "fig6_decomposition.csv",
    "fig8_scatter.csv",
    "fig9_linear.csv",
    "fig11_subgroup.csv",
    "fig12_rec_counts.csv",
];

#[test]
fn missing_seed_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ecosim(&["train", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--seed"), "{}", stderr(&o));
}

#[test]
fn unknown_scenario_lists_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let o = ecosim(&[
        "train",
        "--scenario",
        "nope",
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    for name in ["saturated_log", "linear", "subgroup_init", "subgroup_slope"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn invalid_scenario_file_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut s: serde_json::Value = serde_json::from_str(
        &ecosim_harness::Scenario::load("saturated_log")
            .unwrap()
            .to_json(),
    )
    .unwrap();
    s["config"]["provider_groups"][0]["no_rec_drift"] = serde_json::json!(0.5);
    std::fs::write(&path, s.to_string()).unwrap();
    let o = ecosim(&[
        "train",
        "--config",
        path.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("provider_groups[0].no_rec_drift"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn lambda_out_of_range_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = ecosim(&[
        "train",
        "--lambda",
        "1.5",
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = ecosim(&[
        "train",
        "--lambda",
        "0.5",
        "--epochs",
        "2",
        "--seed",
        "3",
        "--out",
        out,
        "--threads",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("agent.ckpt").exists());
    let curve = read(dir.path(), "curve.csv");
    assert_eq!(curve.lines().count(), 3);
    assert!(curve.starts_with("epoch,objective,"));

    let ckpt = dir.path().join("agent.ckpt");
    let eval_dir = dir.path().join("eval");
    let args = |lambda: &str| {
        vec![
            "evaluate".to_string(),
            "--checkpoint".into(),
            ckpt.to_str().unwrap().into(),
            "--lambda".into(),
            lambda.into(),
            "--rollouts".into(),
            "3".into(),
            "--seed".into(),
            "5".into(),
            "--out".into(),
            eval_dir.to_str().unwrap().into(),
        ]
    };
    let o = ecosim(&args("0.5").iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(&read(&eval_dir, "eval.json")).unwrap();
    assert_eq!(summary["n"], 3);

    let o = ecosim(&args("0.2").iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(o.status.code(), Some(1), "lambda mismatch must be rejected");
}

#[test]
fn evaluate_random_needs_no_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let o = ecosim(&[
        "evaluate",
        "--agent",
        "random",
        "--rollouts",
        "2",
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = ecosim(&[
        "evaluate",
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1), "eco agent without a checkpoint");
}

#[test]
fn sweep_emits_figures_and_plot_reproduces_them() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let o = ecosim(&[
        "sweep",
        "--scenario",
        "subgroup_slope",
        "--lambda",
        "0,1",
        "--lr",
        "0.03",
        "--epochs",
        "2",
        "--rollouts",
        "3",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in CSVS {
        assert!(out.join(name).exists(), "{name}");
    }
    assert_eq!(
        read(&out, "fig5_pareto.csv").lines().next().unwrap(),
        "lambda,user_reward_mean,user_reward_se,provider_reward_mean,provider_reward_se"
    );
    // Two lambdas plus the random agent.
    assert_eq!(read(&out, "fig5_pareto.csv").lines().count(), 4);
    let manifest: serde_json::Value = serde_json::from_str(&read(&out, "manifest.json")).unwrap();
    assert_eq!(manifest["scenario"], "subgroup_slope");
    assert!(
        manifest["files"]["fig4_provider_reward.csv"]
            .as_str()
            .unwrap()
            .len()
            == 64
    );

    let replot = dir.path().join("b");
    let o = ecosim(&[
        "plot",
        "--input",
        out.join("sweep.json").to_str().unwrap(),
        "--out",
        replot.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in CSVS.iter().chain(["manifest.json"].iter()) {
        assert_eq!(read(&out, name), read(&replot, name), "{name}");
    }
}

#[test]
fn threads_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(threads);
        let o = Command::new(env!("CARGO_BIN_EXE_ecosim"))
            .args([
                "evaluate",
                "--agent",
                "random",
                "--rollouts",
                "4",
                "--seed",
                "2",
                "--out",
                out.to_str().unwrap(),
            ])
            .env("ECOSIM_THREADS", threads)
            .env("RUST_LOG", "warn")
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        read(&out, "eval.json")
    };
    assert_eq!(run("1"), run("3"), "thread count must not change results");
}
