//! End-to-end runs of the `hydrosketch` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hydrosketch::io::{parse_numeric_csv, read_matrix_csv};

fn hydrosketch(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hydrosketch"))
        .args(args)
        .current_dir(dir)
        .env_remove("HYDROSKETCH_SEED")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hydrosketch(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn with_data() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "--seed",
            "1",
            "generate",
            "--rows",
            "128",
            "--cols",
            "3",
            "--out",
            "a.csv",
            "--labels-out",
            "b.csv",
        ],
    );
    dir
}

#[test]
fn generate_writes_design_and_labels() {
    let dir = with_data();
    assert_eq!(
        read_matrix_csv(dir.path().join("a.csv")).unwrap().shape(),
        (128, 3)
    );
    assert_eq!(
        read_matrix_csv(dir.path().join("b.csv")).unwrap().shape(),
        (128, 1)
    );
}

#[test]
fn sketch_output_has_k_times_r_rows() {
    let dir = with_data();
    let out = ok(
        dir.path(),
        &[
            "sketch", "--input", "a.csv", "--k", "4", "--r", "10", "--proj", "hadamard",
        ],
    );
    assert!(out.starts_with("c0,c1,c2\n"));
    assert_eq!(parse_numeric_csv(out.as_bytes()).unwrap().shape(), (40, 3));
}

#[test]
fn node_files_aggregate_to_the_direct_sketch() {
    let dir = with_data();
    let direct = ok(
        dir.path(),
        &[
            "--seed", "9", "sketch", "--input", "a.csv", "--k", "4", "--r", "8",
        ],
    );
    let staged = ok(
        dir.path(),
        &[
            "--seed",
            "9",
            "sketch",
            "--input",
            "a.csv",
            "--k",
            "4",
            "--r",
            "8",
            "--nodes-dir",
            "nodes",
        ],
    );
    assert_eq!(direct, staged);
    let manifest = fs::read_to_string(dir.path().join("nodes/manifest.csv")).unwrap();
    assert!(manifest.starts_with("node,r,d,seed,file\n"));
    assert_eq!(manifest.lines().count(), 5);
    let node = fs::read_to_string(dir.path().join("nodes/node_0002.csv")).unwrap();
    assert!(node.starts_with("node,r,d,seed\n2,8,3,"));
    assert_eq!(ok(dir.path(), &["sketch", "--from-nodes", "nodes"]), direct);
}

#[test]
fn hybrid_output_has_final_size() {
    let dir = with_data();
    let out = ok(
        dir.path(),
        &[
            "hybrid", "--input", "a.csv", "--k", "4", "--mu", "0.5", "--rho", "0.5",
        ],
    );
    assert_eq!(parse_numeric_csv(out.as_bytes()).unwrap().shape(), (32, 3));
}

#[test]
fn plan_reports_capped_accuracy_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &[
            "plan",
            "--n",
            "2048",
            "--d",
            "20",
            "--k",
            "8",
            "--epsilon",
            "0.5",
            "--delta",
            "0.2",
        ],
    );
    assert!(out.lines().any(|l| l == "R=2040"), "{out}");
    assert!(out.lines().any(|l| l == "capped=true"), "{out}");
    assert!(out.lines().any(|l| l.starts_with("R_tilde=")));
    // Budgets in reals: r = C1/d per node, R̃ = C3/d.
    let budget = ok(
        dir.path(),
        &[
            "plan", "--n", "8192", "--d", "40", "--k", "8", "--c1", "20000", "--c2", "200000",
            "--c3", "80000",
        ],
    );
    for line in ["r=500", "R=4000", "R_tilde=2000", "capped=false"] {
        assert!(budget.lines().any(|l| l == line), "{line}: {budget}");
    }
    assert!(!hydrosketch(
        dir.path(),
        &[
            "plan", "--n", "8192", "--d", "40", "--k", "8", "--c1", "4000", "--c2", "200000",
            "--c3", "80000"
        ]
    )
    .status
    .success());
}

#[test]
fn descent_commands_write_traces() {
    let dir = with_data();
    ok(
        dir.path(),
        &[
            "gd", "--input", "a.csv", "--labels", "b.csv", "--k", "4", "--r", "16", "--iters",
            "30", "--trace", "gd.csv",
        ],
    );
    let trace = fs::read_to_string(dir.path().join("gd.csv")).unwrap();
    assert!(trace.starts_with("t,eta,loss,err_to_opt\n"));
    assert_eq!(trace.lines().count(), 32);
    ok(
        dir.path(),
        &[
            "fedavg",
            "--input",
            "a.csv",
            "--labels",
            "b.csv",
            "--k",
            "4",
            "--r",
            "16",
            "--iters",
            "10",
            "--epochs",
            "3",
            "--static-sample",
            "--trace",
            "fed.csv",
        ],
    );
    assert_eq!(
        fs::read_to_string(dir.path().join("fed.csv"))
            .unwrap()
            .lines()
            .count(),
        12
    );
}

#[test]
fn diagnostics_have_headers() {
    let dir = with_data();
    let flatten = ok(
        dir.path(),
        &["diag-flatten", "--input", "a.csv", "--k", "4"],
    );
    assert!(flatten.starts_with("row,block,score,target,deviation,zeta,within\n"));
    assert_eq!(flatten.lines().count(), 129);
    let bins = ok(
        dir.path(),
        &[
            "diag-bins",
            "--n",
            "100",
            "--k",
            "10",
            "--r",
            "50",
            "--trials",
            "3",
        ],
    );
    assert!(bins.starts_with("trial,block,count,target,exceeds\n"));
    assert_eq!(bins.lines().count(), 31);
    let gauss = ok(
        dir.path(),
        &["diag-gauss", "--nu", "4,16", "--samples", "1000"],
    );
    assert!(gauss.starts_with("nu,samples,statistic\n"));
    assert_eq!(gauss.lines().count(), 3);
}

#[test]
fn environment_seed_is_a_fallback_for_the_flag() {
    let dir = with_data();
    let args = ["sketch", "--input", "a.csv", "--k", "2", "--r", "5"];
    let flagged: Vec<&str> = ["--seed", "77"].iter().chain(&args).copied().collect();
    let by_flag = ok(dir.path(), &flagged);
    let by_env = Command::new(env!("CARGO_BIN_EXE_hydrosketch"))
        .args(args)
        .current_dir(dir.path())
        .env("HYDROSKETCH_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(by_env.stdout).unwrap(), by_flag);
    assert_ne!(ok(dir.path(), &args), by_flag);
}

#[test]
fn experiment_writes_configured_output() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.conf"),
        "experiment = gaussianity\nnu = 8\nsamples = 1000\ntrials = 2\noutput = results.csv\n",
    )
    .unwrap();
    ok(dir.path(), &["experiment", "--config", "run.conf"]);
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(results.starts_with("experiment,trial,params,metric,value\n"));
    assert_eq!(results.lines().count(), 3);
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let dir = with_data();
    fs::write(dir.path().join("bad.csv"), "1,2\n3,x\n").unwrap();
    for args in [
        &["sketch", "--input", "missing.csv", "--k", "2", "--r", "4"][..],
        &["sketch", "--input", "bad.csv", "--k", "1", "--r", "1"],
        &["sketch", "--input", "a.csv", "--k", "5", "--r", "4"],
        &[
            "hybrid", "--input", "a.csv", "--k", "4", "--mu", "1.5", "--rho", "0.5",
        ],
        &[
            "gd", "--input", "a.csv", "--labels", "a.csv", "--k", "4", "--r", "4",
        ],
    ] {
        let out = hydrosketch(dir.path(), args);
        assert!(!out.status.success(), "{args:?}");
        assert!(
            String::from_utf8_lossy(&out.stderr).starts_with("error:"),
            "{args:?}"
        );
    }
    let located = hydrosketch(
        dir.path(),
        &["sketch", "--input", "bad.csv", "--k", "1", "--r", "1"],
    );
    assert!(String::from_utf8_lossy(&located.stderr).contains("line 2"));
    assert_eq!(
        hydrosketch(dir.path(), &["frobnicate"]).status.code(),
        Some(2)
    );
}
