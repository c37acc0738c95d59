use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ergomoment"));
    c.env_remove("ERGOMOMENT_THREADS");
    c
}

fn zoo(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../zoo").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

const RADEMACHER: &str = r#"{"P": [[0.5, 0.5], [0.5, 0.5]], "states": ["+", "-"]}"#;
const SIGNS: &str = r#"{"values": [1, -1], "banach_norm": 1}"#;

#[test]
fn rademacher_preset_reports_280_at_10() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = run(&["run", zoo("rademacher_s4.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    let values = report["tasks"][0]["result"]["values"].as_array().unwrap();
    let at10 = values.iter().find(|v| v["n"] == 10).unwrap();
    assert_eq!(at10["exact_s4"], 280.0);
    assert_eq!(report["provenance"]["seed"], 7);
    assert_eq!(report["provenance"]["config_sha256"].as_str().unwrap().len(), 64);
    assert!(out.join("report.meta.json").exists());
    let csv = std::fs::read_to_string(out.join("0_oracle_s4.csv")).unwrap();
    assert!(csv.starts_with("n,exact_S4\n1,1.0\n2,8.0\n"));
    assert!(stderr(&o).contains("PASS task 0 oracle_s4 polynomial"));
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let preset = zoo("tightness_uniform.json");
    let mut bodies = Vec::new();
    for (idx, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("run{idx}"));
        let o = bin()
            .env("ERGOMOMENT_THREADS", threads)
            .args(["run", preset.to_str().unwrap(), "--reps", "500", "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(o.status.code() == Some(0) || o.status.code() == Some(2), "{}", stderr(&o));
        bodies.push(std::fs::read(out.join("report.json")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn row_sum_error_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let preset = write(
        dir.path(),
        "bad.json",
        r#"{"schema": 1, "name": "bad", "seed": 1, "tasks": [{"kind": "ledger",
            "system": {"kind": "finite", "P": [[0.5, 0.49], [0.5, 0.5]]},
            "observable": {"values": [1, -1], "banach_norm": 1}}]}"#,
    );
    let o = run(&["run", &preset]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[E_NOT_STOCHASTIC]: P not stochastic: row 0"), "{}", stderr(&o));
    let model = write(dir.path(), "m.json", r#"{"P": [[0.5, 0.49], [0.5, 0.5]]}"#);
    let obs = write(dir.path(), "phi.json", SIGNS);
    let o = run(&["oracle", "s4", "--model", &model, "--obs", &obs, "--n", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("P not stochastic: row 0"));
}

#[test]
fn input_errors_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(
        dir.path(),
        "u.json",
        r#"{"schema": 1, "name": "u", "seed": 1, "tasks": [{"kind": "spectral", "system": {"kind": "teleporter"}}]}"#,
    );
    let o = run(&["run", &unknown]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[E_UNKNOWN_KIND]"), "{}", stderr(&o));

    let no_seed = write(dir.path(), "s.json", r#"{"schema": 1, "name": "s", "tasks": []}"#);
    assert!(stderr(&run(&["run", &no_seed])).starts_with("error[E_SCHEMA]"));

    let o = run(&["run", dir.path().join("missing.json").to_str().unwrap()]);
    assert!(stderr(&o).starts_with("error[E_IO]"));

    let gauss = write(dir.path(), "g.json", r#"{"kind": "gauss"}"#);
    let obs = write(dir.path(), "phi.json", SIGNS);
    let o = run(&["verify", "ledger", "--model", &gauss, "--obs", &obs]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[E_NEEDS_FINITE]"));

    // the stationary-vector shape is validated when supplied
    let bad_nu = write(dir.path(), "nu.json", r#"{"P": [[0.5, 0.5], [0.5, 0.5]], "nu": [0.9, 0.1]}"#);
    let o = run(&["oracle", "s4", "--model", &bad_nu, "--obs", &obs, "--n", "3"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn stochastic_subcommands_require_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.json", RADEMACHER);
    let obs = write(dir.path(), "phi.json", SIGNS);
    let o = run(&["mc", "s4", "--system", &model, "--obs", &obs, "--n", "10", "--reps", "200"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["verify", "bound", "--system", &model, "--obs", &obs, "--n", "8", "--mode", "mc", "--reps", "200"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("E_USAGE"));
}

#[test]
fn oracle_csv_on_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.json", RADEMACHER);
    let obs = write(dir.path(), "phi.json", SIGNS);
    let o = run(&["oracle", "s4", "--model", &model, "--obs", &obs, "--n", "1,2,10", "--out", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "n,exact_S4\n1,1.0\n2,8.0\n10,280.0\n");
}

#[test]
fn bound_csv_columns_and_meta_file() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.json", r#"{"P": [[0.75, 0.25], [0.25, 0.75]]}"#);
    let obs = write(dir.path(), "phi.json", SIGNS);
    let out = dir.path().join("bound.csv");
    let o = run(&[
        "verify", "bound", "--system", &model, "--obs", &obs, "--n", "8,16", "--format", "csv", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("n,lhs,term1,term2,term3,empirical_K\n8,"));
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("bound.csv.meta.json").exists());
}

#[test]
fn failed_check_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.json", r#"{"P": [[0.75, 0.25], [0.25, 0.75]]}"#);
    let o = run(&["spectral", "--model", &model, "--expect-theta", "0.25"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("FAIL task 0 spectral theta"));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(report["tasks"][0]["result"]["certificate"]["theta"], 0.5);
    assert_eq!(report["tasks"][0]["result"]["certificate"]["C"], 1.0);
}

#[test]
fn system_config_with_seed_and_auto_burn_in() {
    let dir = tempfile::tempdir().unwrap();
    let ar = write(
        dir.path(),
        "ar.json",
        r#"{"kind": "ar", "A": 0.5, "noise": {"kind": "uniform", "low": -1, "high": 1}, "seed": 42, "burn_in": "auto"}"#,
    );
    let obs = write(dir.path(), "x.json", r#"{"kind": "coordinate", "index": 0, "banach_norm": 2, "sup_bound": 2}"#);
    let o = run(&["mc", "s4", "--system", &ar, "--obs", &obs, "--n", "50", "--reps", "400", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["provenance"]["seed"], 7);
    assert_eq!(report["config"]["tasks"][0]["system"]["seed"], 7);
    assert_eq!(report["tasks"][0]["result"]["centering"]["method"], "batch_means");
    assert_eq!(report["tasks"][0]["result"]["sampler"]["burn_in"], 27);
}

#[test]
fn bad_thread_env_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.json", RADEMACHER);
    let o = bin().env("ERGOMOMENT_THREADS", "zero").args(["spectral", "--model", &model]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[E_USAGE]"));
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
