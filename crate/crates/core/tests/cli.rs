use std::process::{Command, Output};

use netshuffle::graph::{self, generate_topology, Topology};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_netshuffle"));
    cmd.args(args)
        .env("RUST_LOG", "off")
        .env_remove("NETSHUFFLE_BUDGET");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn graph_info_examples() {
    let k5 = json(&[
        "graph",
        "info",
        "--topology",
        "complete",
        "--n",
        "5",
        "--seed",
        "1",
    ]);
    assert_eq!(k5["spectral_gap"].as_f64().unwrap(), 0.75);
    assert_eq!(k5["ergodic"], true);
    let c4 = json(&[
        "graph",
        "info",
        "--topology",
        "cycle",
        "--n",
        "4",
        "--seed",
        "1",
    ]);
    assert_eq!(c4["ergodic"], false);
    assert_eq!(c4["bipartite"], true);
    let with_eps = json(&[
        "graph",
        "info",
        "--topology",
        "complete",
        "--n",
        "3",
        "--eps0",
        "1",
        "--seed",
        "1",
    ]);
    assert_eq!(with_eps["recommended_T"], 10);
}

#[test]
fn edge_list_matches_topology() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k3.txt");
    std::fs::write(&path, "# triangle\n0 1\n1 2\n\n0 2\n").unwrap();
    let a = run(&[
        "graph",
        "info",
        "--edges",
        path.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    let b = run(&[
        "graph",
        "info",
        "--topology",
        "complete",
        "--n",
        "3",
        "--seed",
        "1",
    ]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn parse_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "0 1\n1 2\n2 two\n").unwrap();
    let out = run(&[
        "graph",
        "info",
        "--edges",
        path.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn bounds_compute_examples() {
    let fmt = json(&[
        "bounds", "compute", "--model", "fmt", "--eps0", "1", "--n", "10000", "--delta", "1e-6",
        "--seed", "0",
    ]);
    assert!((fmt["eps"].as_f64().unwrap() - 0.2140).abs() < 1e-4);
    assert_eq!(fmt["valid"], true);
    let sub = json(&[
        "bounds",
        "compute",
        "--model",
        "subsample_wor",
        "--eps",
        "0.6931",
        "--l",
        "50",
        "--n",
        "100",
        "--delta",
        "1e-6",
        "--seed",
        "0",
    ]);
    assert!((sub["eps"].as_f64().unwrap() - 0.4055).abs() < 1e-4);
    let invalid = run(&[
        "bounds", "compute", "--model", "fmt", "--eps0", "5", "--n", "100", "--delta", "1e-6",
        "--seed", "0",
    ]);
    assert!(invalid.status.success());
    let v: Value = serde_json::from_slice(&invalid.stdout).unwrap();
    assert_eq!(v["valid"], false);
    assert!(v["eps"].is_null());
}

#[test]
fn full_precision_on_request() {
    let full = json(&[
        "bounds",
        "compute",
        "--model",
        "fmt",
        "--eps0",
        "1",
        "--n",
        "10000",
        "--delta",
        "1e-6",
        "--precision",
        "0",
        "--seed",
        "0",
    ]);
    assert!((full["eps"].as_f64().unwrap() - 0.21402565193083783).abs() < 1e-15);
}

#[test]
fn sweep_csv_orders_models() {
    let out = run(&[
        "bounds",
        "sweep",
        "--model",
        "netshuffle,smpl_wlk",
        "--eps0",
        "1",
        "--n",
        "1000:100000:log",
        "--p",
        "0.1",
        "--delta",
        "1e-6",
        "--seed",
        "0",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "model,eps0,n,delta,p,l,eps,delta_out,valid"
    );
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 18);
    let mut compared = 0;
    for net in rows.iter().filter(|r| r[0] == "netshuffle") {
        let smpl = rows
            .iter()
            .find(|r| r[0] == "smpl_wlk" && r[2] == net[2])
            .unwrap();
        if net[8] == "true" && smpl[8] == "true" {
            let (a, b): (f64, f64) = (net[6].parse().unwrap(), smpl[6].parse().unwrap());
            assert!(b < a, "n = {}", net[2]);
            compared += 1;
        }
    }
    assert!(compared >= 4);
}

#[test]
fn simulate_without_walking_keeps_values_home() {
    let out = run(&[
        "simulate",
        "--protocol",
        "rnd_wlk",
        "--topology",
        "complete",
        "--n",
        "3",
        "--randomizer",
        "identity",
        "--T",
        "0",
        "--trials",
        "1",
        "--seed",
        "9",
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["per_client"], serde_json::json!([[0], [1], [2]]));
    assert_eq!(v["T"], 0);
}

#[test]
fn simulate_is_reproducible() {
    let args = [
        "simulate",
        "--topology",
        "erdos_renyi",
        "--edge-p",
        "0.4",
        "--n",
        "10",
        "--trials",
        "200",
        "--seed",
        "77",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 200);
}

#[test]
fn summary_matches_walk_distribution() {
    let trials = 100_000;
    let out = run(&[
        "simulate",
        "--topology",
        "erdos_renyi",
        "--edge-p",
        "0.5",
        "--n",
        "6",
        "--T",
        "3",
        "--trials",
        &trials.to_string(),
        "--summary",
        "--seed",
        "4",
        "--precision",
        "0",
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let g = generate_topology(&Topology::ErdosRenyi { p: 0.5 }, 6, 4).unwrap();
    for (u, row) in v["counts"].as_array().unwrap().iter().enumerate() {
        let q = graph::walk_distribution(&g, u, 3).unwrap();
        for (w, c) in row.as_array().unwrap().iter().enumerate() {
            let f = c.as_f64().unwrap() / trials as f64;
            let sigma = (q[w] * (1.0 - q[w]) / trials as f64).sqrt();
            assert!(
                (f - q[w]).abs() <= 3.0 * sigma + 1e-12,
                "{u}->{w}: {f} vs {}",
                q[w]
            );
        }
    }
}

#[test]
fn auto_rounds_need_an_ergodic_graph() {
    let out = run(&[
        "simulate",
        "--topology",
        "cycle",
        "--n",
        "4",
        "--T",
        "auto",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not ergodic"));
    let fixed = run(&[
        "simulate",
        "--topology",
        "cycle",
        "--n",
        "4",
        "--T",
        "5",
        "--seed",
        "1",
    ]);
    assert!(fixed.status.success());
}

#[test]
fn verify_examples() {
    let l = run(&[
        "verify",
        "lemma1",
        "--topology",
        "complete",
        "--n",
        "4",
        "--eps0",
        "1",
        "--seed",
        "1",
    ]);
    assert!(l.status.success());
    let m = run(&[
        "verify",
        "mixing",
        "--topology",
        "erdos_renyi",
        "--n",
        "50",
        "--p",
        "0.2",
        "--seed",
        "1",
    ]);
    assert!(m.status.success());
    let all = run(&["verify", "all", "--budget", "1e6", "--seed", "1"]);
    assert!(all.status.success());
    let report: Value = serde_json::from_slice(&all.stdout).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 6);
    for c in checks {
        for field in ["check", "instance", "observed", "bound", "pass"] {
            assert!(c.get(field).is_some(), "missing {field}");
        }
    }
}

#[test]
fn verify_failure_sets_exit_code() {
    let out = run(&["verify", "lemma1", "--T", "0", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn over_budget_checks_are_skipped() {
    let args = [
        "verify", "lemma1", "--n", "7", "--budget", "1000", "--seed", "1",
    ];
    let relaxed = run(&args);
    assert!(relaxed.status.success());
    let report: Value = serde_json::from_slice(&relaxed.stdout).unwrap();
    assert_eq!(report["checks"][0]["status"], "skipped");
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(run(&strict).status.code(), Some(1));

    let env = run_env(
        &["verify", "lemma1", "--n", "7", "--seed", "1"],
        &[("NETSHUFFLE_BUDGET", "1000")],
    );
    let report: Value = serde_json::from_slice(&env.stdout).unwrap();
    assert_eq!(report["checks"][0]["status"], "skipped");
}

#[test]
fn unknown_flags_are_rejected() {
    let out = run(&[
        "simulate",
        "--topology",
        "complete",
        "--n",
        "3",
        "--walk-length",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"topology": "complete", "n": 4, "eps0": 0.5, "seed": 3}"#,
    )
    .unwrap();
    let from_file = json(&["graph", "info", "--config", cfg.to_str().unwrap()]);
    assert_eq!(from_file["n"], 4);
    let overridden = json(&[
        "graph",
        "info",
        "--config",
        cfg.to_str().unwrap(),
        "--n",
        "6",
    ]);
    assert_eq!(overridden["n"], 6);

    std::fs::write(&cfg, r#"{"topology": "complete", "n": 4, "colour": "red"}"#).unwrap();
    let bad = run(&[
        "graph",
        "info",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("colour"));
}

#[test]
fn missing_seed_is_drawn_and_reported() {
    let out = run(&["simulate", "--topology", "complete", "--n", "3"]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let seed: u64 = stderr
        .lines()
        .find_map(|l| l.strip_prefix("seed: "))
        .unwrap()
        .parse()
        .unwrap();
    let again = run(&[
        "simulate",
        "--topology",
        "complete",
        "--n",
        "3",
        "--seed",
        &seed.to_string(),
    ]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = run(&[
        "bounds",
        "sweep",
        "--model",
        "fmt",
        "--eps0",
        "0.5:1:0.25",
        "--n",
        "10000",
        "--delta",
        "1e-6",
        "--out",
        path.to_str().unwrap(),
        "--seed",
        "0",
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 4);
}
