use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_combireg")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn check_reports_and_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(d, &["check", "--emit", "cardinality:2:1", "--out", "c.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "TUM: yes, integral: yes, feasible outcomes: 3");

    let o = run(d, &["check-tum", "--constraints", "c.json"]);
    assert_eq!(o.status.code(), Some(0));

    std::fs::write(d.join("odd.json"), r#"{"d":3,"m":3,"A":[[1,1,0],[0,1,1],[1,0,1]],"b":[1,1,1]}"#).unwrap();
    let o = run(d, &["check", "--constraints", "odd.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).starts_with("TUM: no, integral: no"));

    std::fs::write(d.join("bad.json"), r#"{"d":2,"m":1,"A":[[2,1]],"b":[1]}"#).unwrap();
    let o = run(d, &["check", "--constraints", "bad.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("invalid constraint entry"));

    let o = run(d, &["check", "--emit", "matching:2:2"]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["d"], 4);
}

#[test]
fn simulate_fit_diagnose_predict() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(d, &["check", "--emit", "cardinality:2:1", "--out", "c.json"]).status.success());
    let o = run(d, &["simulate", "--constraints", "c.json", "--n", "150", "--p", "2", "--seed", "4", "--out", "sim"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["data.csv", "truth.csv", "constraints.json", "resolved_config.toml"] {
        assert!(d.join("sim").join(f).exists(), "{f}");
    }
    let header = std::fs::read_to_string(d.join("sim/data.csv")).unwrap();
    assert!(header.starts_with("y_1,y_2,x_1,x_2\n"));

    let o = run(
        d,
        &[
            "fit",
            "--data",
            "sim/data.csv",
            "--constraints",
            "sim/constraints.json",
            "--truth",
            "sim/truth.csv",
            "--iters",
            "300",
            "--burnin",
            "50",
            "--seed",
            "9",
            "--out",
            "fit",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("posterior-mean RMSE vs truth"));
    let chain = std::fs::read_to_string(d.join("fit/chain.csv")).unwrap();
    assert_eq!(chain.lines().count(), 251);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("fit/metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 9);
    let resolved = std::fs::read_to_string(d.join("fit/resolved_config.toml")).unwrap();
    assert!(resolved.contains("iterations = 300"));

    let o = run(d, &["diagnose", "--chain", "fit/chain.csv", "--out", "diag"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let acf = std::fs::read_to_string(d.join("diag/acf.csv")).unwrap();
    assert_eq!(acf.lines().count(), 52);
    assert!(acf.lines().nth(1).unwrap().starts_with("0,1,1,1,1"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("diag/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["parameters"].as_array().unwrap().len(), 4);
    assert!(summary["acceptance"]["mean"].as_f64().unwrap() > 0.0);

    let o = run(
        d,
        &[
            "predict",
            "--chain",
            "fit/chain.csv",
            "--constraints",
            "c.json",
            "--x",
            "1,-0.5",
            "--mc-draws",
            "50",
            "--out",
            "pred",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let law = std::fs::read_to_string(d.join("pred/law.csv")).unwrap();
    let total: f64 = law.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);

    std::fs::write(d.join("q.json"), r#"{"event":{"op":"sum","coords":[0,1],"cmp":"eq","target":0}}"#).unwrap();
    let o = run(
        d,
        &[
            "predict",
            "--chain",
            "fit/chain.csv",
            "--constraints",
            "c.json",
            "--x",
            "1,-0.5",
            "--query",
            "q.json",
            "--mc-draws",
            "50",
            "--out",
            "pred",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let ev: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("pred/event.json")).unwrap()).unwrap();
    let p = ev["mean"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));

    // Wrong covariate length is a usage error.
    let o = run(d, &["predict", "--chain", "fit/chain.csv", "--constraints", "c.json", "--x", "1", "--out", "pred"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_and_intercept_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(d, &["check", "--emit", "cardinality:3:1", "--out", "c.json"]).status.success());
    std::fs::write(d.join("run.toml"), "[sampler]\niterations = 120\nburnin = 20\nthin = 2\n[simulate]\nn = 60\n")
        .unwrap();
    let o = run(
        d,
        &["--config", "run.toml", "simulate", "--constraints", "c.json", "--intercept", "-0.5,0,0.3", "--out", "sim"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(d.join("sim/data.csv")).unwrap().lines().count(), 61);

    let o = run(
        d,
        &[
            "--config",
            "run.toml",
            "--threads",
            "2",
            "fit",
            "--data",
            "sim/data.csv",
            "--constraints",
            "c.json",
            "--out",
            "fit",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(d.join("fit/chain.csv")).unwrap().lines().count(), 51);
    let resolved = std::fs::read_to_string(d.join("fit/resolved_config.toml")).unwrap();
    assert!(resolved.contains("thin = 2"));

    // Intercept chains default to x = 1.
    let o = run(
        d,
        &["predict", "--chain", "fit/chain.csv", "--constraints", "c.json", "--mc-draws", "20", "--out", "pred"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(d.join("pred/law.csv")).unwrap().lines().count(), 5);
}

#[test]
fn infeasible_row_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(d, &["check", "--emit", "cardinality:2:1", "--out", "c.json"]).status.success());
    std::fs::write(d.join("data.csv"), "y_1,y_2\n1,0\n1,1\n").unwrap();
    let o = run(
        d,
        &["fit", "--data", "data.csv", "--constraints", "c.json", "--iters", "10", "--burnin", "0", "--out", "fit"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("data row 2 (CSV line 3)"), "{}", stderr(&o));

    std::fs::write(d.join("data.csv"), "y_1,y_2\n1,0\n0,x\n").unwrap();
    let o = run(d, &["fit", "--data", "data.csv", "--constraints", "c.json", "--out", "fit"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn duck_scenario_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(d, &["simulate", "--scenario", "duck", "--seed", "1", "--out", "duck"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("95 ducks and 339 possible pairs"));
    let o = run(
        d,
        &[
            "fit",
            "--data",
            "duck/data.csv",
            "--hierarchy",
            "duck/hierarchy.json",
            "--iters",
            "6",
            "--burnin",
            "2",
            "--out",
            "fit",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(
        d,
        &[
            "predict",
            "--chain",
            "fit/chain.csv",
            "--hierarchy",
            "duck/hierarchy.json",
            "--grid",
            "1:20:19",
            "--mc-draws",
            "10",
            "--out",
            "pred",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let curves = std::fs::read_to_string(d.join("pred/curves.csv")).unwrap();
    assert!(curves.starts_with("t,group,prob_mean,prob_lo,prob_hi\n"));
    assert_eq!(curves.lines().count(), 1 + 2 * 7);
}

#[test]
fn fixed_seed_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(d, &["check", "--emit", "cardinality:3:1", "--out", "c.json"]).status.success());
    let o = run(d, &["simulate", "--constraints", "c.json", "--n", "50", "--p", "2", "--seed", "2", "--out", "sim"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut chains = Vec::new();
    for (out, threads) in [("a", "1"), ("b", "3")] {
        let o = run(
            d,
            &[
                "--threads",
                threads,
                "fit",
                "--data",
                "sim/data.csv",
                "--constraints",
                "c.json",
                "--iters",
                "60",
                "--burnin",
                "10",
                "--seed",
                "5",
                "--out",
                out,
            ],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        chains.push(std::fs::read(d.join(out).join("chain.csv")).unwrap());
    }
    assert_eq!(chains[0], chains[1]);
}
