use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mcs-alloc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("MCS_ALLOC_WORKERS", "1").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn generate(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name);
    let path_str = path.to_str().unwrap().to_string();
    let mut full = vec!["generate"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", &path_str]);
    let o = run(&full);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let digest = stdout(&o);
    assert_eq!(digest.trim().len(), 64);
    path_str
}

#[test]
fn generate_fpmt_and_solve_json() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), "f.toml", &["--mode", "fpmt", "--seed", "7", "--m", "10", "--n", "20", "--q", "5"]);
    let o = run(&["solve", &inst, "--solver", "mtp-mcmf", "--k", "12"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["solver"], "mtp-mcmf");
    assert!(v["objectives"]["total_distance_m"].as_f64().unwrap() > 0.0);
    assert!(v["objectives"]["accomplished"].as_u64().unwrap() <= 50);
    assert!(v["runtime_ms"].is_number());
}

#[test]
fn generate_without_out_prints_instance() {
    let o = run(&["generate", "--mode", "fpmt", "--seed", "1", "--m", "2", "--n", "4", "--q", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("format_version = 1"));
    assert_eq!(String::from_utf8(o.stderr).unwrap().trim().len(), 64);
}

#[test]
fn mpft_defaults_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), "m.toml", &["--mode", "mpft", "--seed", "3"]);
    let o = run(&["validate", &inst]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("areas=6 tasks=20"), "{}", stdout(&o));

    let o = run(&["bounds", &inst]);
    assert_eq!(o.status.code(), Some(0));
    let b: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let (c_min, c_max) = (b["c_min"].as_f64().unwrap(), b["c_max"].as_f64().unwrap());
    assert!(c_min <= c_max);

    let budget = format!("{}", 0.5 * (c_min + c_max));
    let o = run(&["solve", &inst, "--solver", "c-ilp", "--budget", &budget, "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(mcs_alloc::report::REPORT_CSV_HEADER));
    assert!(lines.next().unwrap().starts_with("c-ilp,"));
}

#[test]
fn usage_error_is_exit_2() {
    assert_eq!(run(&["generate", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(run(&["solve"]).status.code(), Some(2));
}

#[test]
fn mode_mismatch_is_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), "f.toml", &["--mode", "fpmt", "--seed", "2", "--m", "3", "--n", "6", "--q", "2"]);
    let o = run(&["solve", &inst, "--solver", "w-ilp"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!o.stderr.is_empty());
    assert_eq!(run(&["bounds", &inst]).status.code(), Some(3));
    assert_eq!(run(&["validate", "/nonexistent/x.toml"]).status.code(), Some(3));
}

#[test]
fn infeasible_budget_is_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), "m.toml", &["--mode", "mpft", "--seed", "4"]);
    let o = run(&["solve", &inst, "--solver", "c-ilp", "--budget", "0.001"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8(o.stderr).unwrap().contains("minimum attainable incentive"));
}

#[test]
fn enumeration_budget_is_exit_5() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), "f.toml", &["--mode", "fpmt", "--seed", "5", "--m", "10", "--n", "30", "--q", "5"]);
    let o = run(&["solve", &inst, "--solver", "mt-mcmf", "--route-budget", "1000"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn k_sweep_rows_in_grid_order() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), "f.toml", &["--mode", "fpmt", "--seed", "11", "--m", "10", "--n", "15", "--q", "5"]);
    let o = run(&["sweep", "--axis", "k", "--instance", &inst, "--values", "10..=15"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 7);
    let values: Vec<&str> = rows[1..].iter().map(|r| r.split(',').nth(2).unwrap()).collect();
    assert_eq!(values, ["10", "11", "12", "13", "14", "15"]);
}

#[test]
fn seeded_task_sweep_has_aggregate_rows() {
    let o = run(&[
        "sweep", "--axis", "tasks", "--mode", "fpmt", "--m", "4", "--q", "2", "--values", "8,10", "--seeds", "0..3",
        "--solvers", "mt-mcmf,mt-grdpt",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let kinds: Vec<&str> = text.lines().skip(1).map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(kinds.iter().filter(|k| **k == "run").count(), 2 * 2 * 3);
    assert_eq!(kinds.iter().filter(|k| **k == "mean").count(), 4);
    assert_eq!(kinds.iter().filter(|k| **k == "stddev").count(), 4);
}

#[test]
fn sweep_output_is_deterministic_apart_from_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), "m.toml", &["--mode", "mpft", "--seed", "9", "--n", "8"]);
    let strip = |o: Output| -> Vec<String> {
        let header = mcs_alloc_cli_header();
        let col = header.split(',').position(|c| c == "runtime_ms").unwrap();
        stdout(&o)
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f[col] = "";
                f.join(",")
            })
            .collect()
    };
    let args = ["sweep", "--axis", "weights", "--instance", &inst, "--points", "5"];
    let a = strip(run(&args));
    let b = strip(bin().args(args).env("MCS_ALLOC_WORKERS", "3").output().unwrap());
    assert_eq!(a, b);
    assert_eq!(a.len(), 6);
}

fn mcs_alloc_cli_header() -> String {
    let o = run(&["sweep", "--axis", "distribution", "--mode", "fpmt", "--m", "3", "--n", "6", "--q", "2", "--seeds", "0..1"]);
    stdout(&o).lines().next().unwrap().to_string()
}

#[test]
fn structural_axis_rejects_fixed_instance() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), "f.toml", &["--mode", "fpmt", "--seed", "1", "--m", "3", "--n", "6", "--q", "2"]);
    let o = run(&["sweep", "--axis", "tasks", "--instance", &inst, "--values", "6,8"]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn sweep_error_keeps_message_unwrapped() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate(dir.path(), "f.toml", &["--mode", "fpmt", "--seed", "1", "--m", "4", "--n", "10", "--q", "5"]);
    let o = run(&["sweep", "--axis", "k", "--instance", &inst, "--values", "3..=6"]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.matches("invalid parameter").count(), 1, "{err}");
}
