//! Black-box tests of the `voracle` binary: exit codes, output formats, and
//! seed determinism at the byte level.

use std::path::PathBuf;
use std::process::{Command, Output};

fn voracle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voracle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn sim_run_reports_json_and_exits_zero() {
    let output = voracle(&["sim", "run", &scenario("baseline.toml")]);
    assert_eq!(output.status.code(), Some(0));
    let metrics: serde_json::Value = serde_json::from_slice(&output.stdout).expect("valid JSON");
    assert_eq!(metrics["requests"].as_array().unwrap().len(), 3);
    assert_eq!(metrics["conservation_ok"], serde_json::Value::Bool(true));
    for request in metrics["requests"].as_array().unwrap() {
        assert_eq!(request["matches_canonical"], serde_json::Value::Bool(true));
    }
}

#[test]
fn sim_run_missing_file_exits_two_and_names_the_path() {
    let output = voracle(&["sim", "run", "does-not-exist.toml"]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("does-not-exist.toml"), "stderr: {stderr}");
}

#[test]
fn sim_run_seed_override_is_reproducible() {
    let args = ["sim", "run", &scenario("baseline.toml"), "--seed", "777"];
    let first = voracle(&args);
    let second = voracle(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout, "same seed, same bytes");

    let other = voracle(&["sim", "run", &scenario("baseline.toml"), "--seed", "778"]);
    assert_ne!(
        first.stdout, other.stdout,
        "different seed, different report"
    );
}

#[test]
fn scenario_dir_env_resolves_bare_names() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let output = Command::new(env!("CARGO_BIN_EXE_voracle"))
        .args(["sim", "run", "baseline", "--format", "table"])
        .env("VORACLE_SCENARIO_DIR", &dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&output.stdout).contains("requests"));
}

#[test]
fn sim_run_writes_transcripts() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("run");
    let output = voracle(&[
        "sim",
        "run",
        &scenario("baseline.toml"),
        "--transcript",
        &base.display().to_string(),
        "--out",
        &dir.path().join("report.json").display().to_string(),
    ]);
    assert_eq!(output.status.code(), Some(0));
    let ledger = std::fs::read_to_string(base.with_extension("ledger.jsonl")).unwrap();
    assert!(ledger.lines().count() >= 60, "one line per block");
    let first: serde_json::Value = serde_json::from_str(ledger.lines().next().unwrap()).unwrap();
    assert_eq!(first["height"], serde_json::json!(1));
    let dkg = std::fs::read_to_string(base.with_extension("dkg.jsonl")).unwrap();
    assert!(dkg.contains("\"type\":\"deal\""));
    assert!(dkg.contains("\"type\":\"final\""));
}

#[test]
fn dkg_demo_verifies_and_validates_bounds() {
    let output = voracle(&["dkg", "demo", "--nodes", "5", "--threshold", "3"]);
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("verification  success"));

    let bad = voracle(&["dkg", "demo", "--nodes", "3", "--threshold", "4"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn dkg_demo_single_node_key_matches_its_share() {
    // with n = t = 1 the sole share is the group secret itself
    let output = voracle(&["dkg", "demo", "--nodes", "1", "--threshold", "1"]);
    assert_eq!(output.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&output.stdout).contains("verification  success"));
}

#[test]
fn cost_breakeven_prints_the_paper_crossovers() {
    let output = voracle(&["cost", "breakeven"]);
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("on-chain from n = 4"), "stdout: {stdout}");
    assert!(stdout.contains("ecdsa    from n = 16"), "stdout: {stdout}");
}

#[test]
fn cost_table_shapes() {
    let single = voracle(&["cost", "table", "--max-nodes", "1"]);
    assert_eq!(single.status.code(), Some(0));
    let csv = String::from_utf8_lossy(&single.stdout);
    let lines: Vec<&str> = csv.trim().lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "n,on_chain,ecdsa,bls");
    assert!(lines[1].ends_with(",257607"));
}

#[test]
fn custom_calibration_moves_the_crossovers() {
    let dir = tempfile::tempdir().unwrap();
    let calibration = dir.path().join("calibration.toml");
    std::fs::write(
        &calibration,
        "bls_vs_onchain_breakeven = 6\nbls_vs_ecdsa_breakeven = 20\n",
    )
    .unwrap();
    let output = voracle(&[
        "cost",
        "breakeven",
        "--calibration",
        &calibration.display().to_string(),
        "--format",
        "json",
    ]);
    assert_eq!(output.status.code(), Some(0));
    let parsed: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(parsed["bls_vs_on_chain"], serde_json::json!(6));
    assert_eq!(parsed["bls_vs_ecdsa"], serde_json::json!(20));

    std::fs::write(&calibration, "onchain_base = 1000\nonchain_per_node = 1\n").unwrap();
    let infeasible = voracle(&[
        "cost",
        "breakeven",
        "--calibration",
        &calibration.display().to_string(),
    ]);
    assert_eq!(infeasible.status.code(), Some(2));
}
