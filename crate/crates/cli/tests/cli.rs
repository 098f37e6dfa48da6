use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn proxqn(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proxqn")).args(args).env("PROXQN_CACHE_DIR", cache).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Parses `key=value` tokens of the first line starting with `problem=`.
fn summary(o: &Output) -> Vec<(String, String)> {
    let text = stdout(o);
    let line = text.lines().find(|l| l.starts_with("problem=")).expect("summary line");
    line.split(' ').filter_map(|kv| kv.split_once('=')).map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn field<'a>(kv: &'a [(String, String)], key: &str) -> &'a str {
    &kv.iter().find(|(k, _)| k == key).unwrap().1
}

fn prox_values(text: &str) -> Vec<f64> {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| l.parse().unwrap()).collect()
}

fn meta<'a>(text: &'a str, key: &str) -> &'a str {
    let prefix = format!("# {key}");
    text.lines().find_map(|l| l.strip_prefix(&prefix)).unwrap().trim()
}

#[test]
fn desk_solve_converges() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = proxqn(
        &[
            "solve", "--family", "lasso_gaussian", "--m", "150", "--n", "300", "--lambda", "0.1", "--solver", "zero-sr1",
            "--tol", "1e-8", "--out", out.to_str().unwrap(),
        ],
        &dir.path().join("cache"),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let kv = summary(&o);
    assert_eq!(field(&kv, "status"), "converged");
    let err: f64 = field(&kv, "final_error").parse().unwrap();
    assert!(err.abs() < 1e-6, "final error {err}");
    assert!(field(&kv, "iterations").parse::<usize>().unwrap() > 0);
    let trace = fs::read_to_string(field(&kv, "trace")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "iter,obj_err,step_norm,seconds");
    assert!(out.join("manifest.json").exists());
}

#[test]
fn unknown_solver_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = proxqn(&["solve", "--solver", "newton"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown solver"));
}

#[test]
fn invalid_recipe_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = proxqn(&["solve", "--n", "0", "--no-reference", "--out", dir.path().to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = proxqn(&["solve", "--gamma", "2", "--no-reference", "--out", dir.path().to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn same_seed_gives_same_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let mut traces = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = proxqn(
            &["solve", "--m", "40", "--n", "80", "--seed", "7", "--solver", "fista-bb", "--out", out.to_str().unwrap()],
            &cache,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let text = fs::read_to_string(field(&summary(&o), "trace")).unwrap();
        // the last column is wall-clock time
        let rows: Vec<String> = text.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect();
        traces.push(rows);
    }
    assert!(traces[0].len() > 2);
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn race_writes_traces_manifest_and_script() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("race");
    let o = proxqn(
        &[
            "race", "--families", "lasso_gaussian,nnls", "--m", "30", "--n", "60", "--solvers", "zero-sr1,ista", "--jobs", "2",
            "--tol", "1e-6", "--gnuplot", "--out", out.to_str().unwrap(),
        ],
        &dir.path().join("cache"),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("problem=")).count(), 4);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 4);
    let script = fs::read_to_string(out.join("plot.gp")).unwrap();
    for run in manifest["runs"].as_array().unwrap() {
        let file = run["trace_file"].as_str().unwrap();
        assert!(out.join(file).exists());
        assert!(script.contains(file));
    }
}

#[test]
fn prox_without_low_rank_part_is_the_diagonal_prox() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    fs::write(&input, "# h l1 1\n# x\n3\n0.25\n-2\n# d\n1\n2\n0.5\n").unwrap();
    let o = proxqn(&["prox", input.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(meta(&text, "method"), "diagonal");
    // soft thresholds at 1/dᵢ
    assert_eq!(prox_values(&text), vec![2.0, 0.0, 0.0]);
}

#[test]
fn prox_positive_orthant_example() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    fs::write(&input, "# h nonneg\n# x\n-1\n1\n# u\n1\n0\n").unwrap();
    for finder in ["auto", "exact", "bisection", "ssnewton"] {
        let o = proxqn(&["prox", input.to_str().unwrap(), "--inverse", "--finder", finder], dir.path());
        assert!(o.status.success(), "{finder}: {}", String::from_utf8_lossy(&o.stderr));
        let text = stdout(&o);
        let alpha: f64 = meta(&text, "alpha").parse().unwrap();
        assert!((alpha - 0.5).abs() < 1e-11, "{finder}: {alpha}");
        let z = prox_values(&text);
        assert!(z[0].abs() < 1e-12 && (z[1] - 1.0).abs() < 1e-12, "{finder}: {z:?}");
    }
}

#[test]
fn malformed_prox_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    for bad in ["# h l1 1\n# x\n3\nfoo\n", "# x\n1\n", "# h nonneg\n# x\n1\n2\n# u\n1\n"] {
        fs::write(&input, bad).unwrap();
        let o = proxqn(&["prox", input.to_str().unwrap()], dir.path());
        assert_eq!(o.status.code(), Some(2), "{bad:?}");
    }
    let o = proxqn(&["prox", dir.path().join("missing.txt").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_filters_suites() {
    let dir = tempfile::tempdir().unwrap();
    let o = proxqn(&["validate", "--suite", "rates"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 1);
    assert!(lines[0].starts_with("[PASS]") && lines[0].contains("rates"));
}

#[test]
fn validate_small_oracle_suite() {
    let dir = tempfile::tempdir().unwrap();
    let o = proxqn(&["validate", "--suite", "prox-oracle", "--n", "30", "--instances", "20"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("prox-oracle"));
}

#[test]
fn dump_config_is_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = proxqn(&["--dump-config", "solve", "--seed", "7"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["command"]["solve"]["recipe"]["seed"], 7);
}
