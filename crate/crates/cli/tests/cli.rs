use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn qmobius(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmobius")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, value: &Value) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, value.to_string()).unwrap();
    path
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn uniform(n: usize) -> Value {
    json!({"n": n, "values": vec![1.0 / (1 << n) as f64; 1 << n]})
}

fn column(report: &Value, key: &str) -> Vec<f64> {
    report["rows"].as_array().unwrap().iter().map(|r| r[key].as_f64().unwrap()).collect()
}

#[test]
fn uniform_sweep_counts_subsets() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "u3.json", &uniform(3));
    let out = dir.path().join("out.json");
    let run = qmobius(&["mobius", "--input", s(&input), "--sweep", "--out", s(&out)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let report = read(&out);
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row["dec"], i);
        let expected = (1u32 << (i as u32).count_ones()) as f64 / 8.0;
        assert!((row["classical"].as_f64().unwrap() - expected).abs() < 1e-12);
        assert!((row["exact"].as_f64().unwrap() - expected).abs() < 1e-9);
        assert!(row["sampled"].is_null());
    }
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("011      3"), "{stdout}");
}

#[test]
fn top_point_is_one() {
    let dir = TempDir::new().unwrap();
    let psi: Vec<[f64; 2]> = (0..8).map(|i| [(i as f64 + 1.0).sqrt() / 6.0, 0.0]).collect();
    let spec = json!({"mode": "mobius", "n": 3, "psi_minus": psi, "x": "111"});
    let input = write(&dir, "spec.json", &spec);
    let out = dir.path().join("out.json");
    assert!(qmobius(&["mobius", "--input", s(&input), "--out", s(&out)]).status.success());
    let report = read(&out);
    assert_eq!(report["rows"][0]["x"], "111");
    assert!((report["rows"][0]["exact"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn malformed_input_is_a_validation_failure() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"n\": 3, \"values\": [0.5,").unwrap();
    let run = qmobius(&["mobius", "--input", s(&path), "--sweep"]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("malformed JSON"));

    let not_probability = write(&dir, "neg.json", &json!({"n": 1, "values": [1.5, -0.5]}));
    assert_eq!(qmobius(&["mobius", "--input", s(&not_probability), "--x", "1"]).status.code(), Some(1));

    let wrong_length = write(&dir, "len.json", &json!({"n": 2, "values": [0.5, 0.5]}));
    assert_eq!(qmobius(&["mobius", "--input", s(&wrong_length), "--x", "01"]).status.code(), Some(1));
}

#[test]
fn io_failures_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(qmobius(&["mobius", "--input", s(&missing), "--sweep"]).status.code(), Some(2));

    let input = write(&dir, "u2.json", &uniform(2));
    let unwritable = dir.path().join("no_such_dir").join("out.json");
    let run = qmobius(&["mobius", "--input", s(&input), "--sweep", "--out", s(&unwritable)]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(qmobius(&["mobius", "--x", "01", "--sweep", "--input", "a.json"]).status.code(), Some(1));
    assert_eq!(qmobius(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qmobius(&["--help"]).status.code(), Some(0));
}

#[test]
fn uniform_marginal_is_flat() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "u5.json", &uniform(5));
    let out = dir.path().join("out.json");
    assert!(qmobius(&["marginal", "--input", s(&input), "--n0", "3", "--sweep", "--out", s(&out)]).status.success());
    let report = read(&out);
    for v in column(&report, "exact") {
        assert!((v - 0.125).abs() < 1e-9);
    }
}

#[test]
fn marginal_of_linear_distribution() {
    let dir = TempDir::new().unwrap();
    let values: Vec<f64> = (1..=16).map(|i| i as f64 / 136.0).collect();
    let input = write(&dir, "p.json", &json!({"n": 4, "values": values}));
    let out = dir.path().join("out.json");
    assert!(qmobius(&["marginal", "--input", s(&input), "--n0", "3", "--sweep", "--out", s(&out)]).status.success());
    let report = read(&out);
    let exact = column(&report, "exact");
    // x = 000 collects entries 1 and 9
    assert!((exact[0] - 10.0 / 136.0).abs() < 1e-9);
    assert!((exact.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!((report["column_sum"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    let single = qmobius(&["marginal", "--input", s(&input), "--n0", "3", "--x", "000"]);
    assert!(String::from_utf8_lossy(&single.stdout).contains("0.073529411765"));
}

#[test]
fn marginal_needs_n0() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "u3.json", &uniform(3));
    let run = qmobius(&["marginal", "--input", s(&input), "--sweep"]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("--n0"));
}

#[test]
fn sampled_runs_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "u3.json", &uniform(3));
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&a, &b] {
        let run = qmobius(&["mobius", "--input", s(&input), "--sweep", "--shots", "20000", "--seed", "11", "--out", s(out)]);
        assert!(run.status.success());
    }
    assert_eq!(read(&a), read(&b));

    let report = read(&a);
    for row in report["rows"].as_array().unwrap() {
        let truth = row["exact"].as_f64().unwrap();
        let (est, hw) = (row["sampled"].as_f64().unwrap(), row["half_width"].as_f64().unwrap());
        assert!((est - truth).abs() < 4.0 * hw, "{row}");
    }

    // a single point matches its sweep row
    let single = dir.path().join("single.json");
    qmobius(&["mobius", "--input", s(&input), "--x", "101", "--shots", "20000", "--seed", "11", "--out", s(&single)]);
    assert_eq!(read(&single)["rows"][0], report["rows"][5]);
}

#[test]
fn check_confirms_and_rejects() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "u4.json", &uniform(4));
    let out = dir.path().join("out.json");
    assert!(qmobius(&["marginal", "--input", s(&input), "--n0", "2", "--sweep", "--shots", "5000", "--out", s(&out)])
        .status
        .success());
    let run = qmobius(&["marginal", "--check", s(&out)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).contains("4 rows confirmed"));

    let mut tampered = read(&out);
    tampered["rows"][2]["exact"] = json!(0.3);
    let tampered_path = write(&dir, "tampered.json", &tampered);
    assert_eq!(qmobius(&["marginal", "--check", s(&tampered_path)]).status.code(), Some(1));

    let mut extra = read(&out);
    extra["unexpected"] = json!(1);
    let extra_path = write(&dir, "extra.json", &extra);
    assert_eq!(qmobius(&["marginal", "--check", s(&extra_path)]).status.code(), Some(1));

    assert_eq!(qmobius(&["mobius", "--check", s(&out)]).status.code(), Some(1));
}

#[test]
fn dump_state_writes_prepared_vector() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "u2.json", &uniform(2));
    let dump = dir.path().join("state.json");
    assert!(qmobius(&["mobius", "--input", s(&input), "--x", "10", "--dump-state", s(&dump)]).status.success());
    let state = read(&dump);
    let amps = state["amplitudes"].as_array().unwrap();
    // 2 + 2 * 2 + 3 qubits
    assert_eq!(amps.len(), 1 << 9);
    let norm: f64 = amps.iter().map(|a| a[0].as_f64().unwrap().powi(2) + a[1].as_f64().unwrap().powi(2)).sum();
    assert!((norm - 1.0).abs() < 1e-12);
    assert!(state["layout"].is_object());
}

#[test]
fn minfind_builtin_quadratic() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("min.json");
    let run = qmobius(&["minfind", "--n", "5", "--center", "13.3", "--out", s(&out)]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report = read(&out);
    assert_eq!(report["result"], "01101");
    assert_eq!(report["argmin"], "01101");
    let probes: Vec<u64> = report["probes"].as_array().unwrap().iter().map(|p| p["dec"].as_u64().unwrap()).collect();
    assert_eq!(probes, vec![15, 7, 11, 13, 12]);

    let check = qmobius(&["minfind", "--check", s(&out)]);
    assert!(check.status.success(), "{}", String::from_utf8_lossy(&check.stderr));
}

#[test]
fn minfind_evaluators_agree_on_table_input() {
    let dir = TempDir::new().unwrap();
    let values: Vec<f64> = (0..16).map(|i| 2.0 + ((i * 7) % 16) as f64).collect();
    let input = write(&dir, "e.json", &json!({"n": 4, "values": values}));
    let argmin = format!("{:04b}", (0..16).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap());
    for evaluator in ["classical", "exact", "sampled"] {
        let out = dir.path().join(format!("{evaluator}.json"));
        let run = qmobius(&["minfind", "--input", s(&input), "--evaluator", evaluator, "--seed", "3", "--out", s(&out)]);
        assert!(run.status.success(), "{evaluator}: {}", String::from_utf8_lossy(&run.stderr));
        assert_eq!(read(&out)["result"], argmin.as_str(), "{evaluator}");
    }
    let run = qmobius(&["minfind", "--input", s(&input), "--evaluator", "exact", "--shots", "100"]);
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn minfind_rejects_nonpositive_objective() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "e.json", &json!({"n": 2, "values": [1.0, 0.0, 2.0, 3.0]}));
    assert_eq!(qmobius(&["minfind", "--input", s(&input)]).status.code(), Some(1));
}

#[test]
fn verify_passes_by_default() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("verify.json");
    let run = qmobius(&["verify", "--seed", "5", "--cases", "2", "--out", s(&out)]);
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "{stdout}");
    assert!(stdout.contains("[PASS] z0 = 0.25"), "{stdout}");
    let report = read(&out);
    assert_eq!(report["passed"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 5);
}

#[test]
fn verify_catches_injected_fault() {
    let run = qmobius(&["verify", "--cases", "2", "--inject-fault", "flip-control"]);
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert_eq!(run.status.code(), Some(1));
    assert!(stdout.contains("[FAIL] C coefficients"), "{stdout}");
    assert!(stdout.contains("C coefficient mismatch"), "{stdout}");
    assert!(!String::from_utf8_lossy(&qmobius(&["verify", "--help"]).stdout).contains("inject"));
}
