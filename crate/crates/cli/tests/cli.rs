use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use privlp::lp::{PrivateLp, SensitivityModel};
use privlp::rng::rng_from_seed;
use privlp::verification::{query_release_lp, random_covering_instance};
use tempfile::TempDir;

fn privlp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privlp")).args(args).output().expect("binary runs")
}

fn write_instance(dir: &Path, name: &str, lp: &PrivateLp) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, lp.to_json()).unwrap();
    path
}

fn query_instance(dir: &Path, model: SensitivityModel) -> PathBuf {
    let mut rng = rng_from_seed(5);
    let lp = PrivateLp {
        instance: query_release_lp(6, 4, &mut rng).unwrap().to_instance(),
        sensitivity: model,
    };
    write_instance(dir, "query.json", &lp)
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn repeated_solve_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let inst = query_instance(dir.path(), SensitivityModel::LowSensScalar { delta_inf: 5e-5 });
    let inst = inst.to_str().unwrap();
    let args = [
        "solve-scalar", "--instance", inst, "--epsilon", "1", "--delta", "1e-6", "--alpha", "0.4", "--seed", "11",
        "--trials", "3",
    ];
    let a = stdout(&privlp(&args));
    let b = stdout(&privlp(&args));
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["command"], "scalar");
    assert_eq!(v["seed"], 11);
}

#[test]
fn output_file_matches_stdout() {
    let dir = TempDir::new().unwrap();
    let inst = query_instance(dir.path(), SensitivityModel::LowSensColumn { delta_1: 2e-5 });
    let out = dir.path().join("report.json");
    let base = [
        "solve-column", "--instance", inst.to_str().unwrap(), "--epsilon", "1", "--delta", "1e-6", "--alpha",
        "0.5", "--seed", "3",
    ];
    let printed = stdout(&privlp(&base));
    let mut with_out = base.to_vec();
    with_out.extend(["--output", out.to_str().unwrap()]);
    assert!(stdout(&privlp(&with_out)).is_empty());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), printed);
}

#[test]
fn model_mismatch_is_refused() {
    let dir = TempDir::new().unwrap();
    let inst = query_instance(dir.path(), SensitivityModel::LowSensScalar { delta_inf: 5e-5 });
    let out = privlp(&[
        "solve-row", "--instance", inst.to_str().unwrap(), "--epsilon", "1", "--delta", "1e-6", "--alpha", "0.4",
        "--seed", "1",
    ]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("low_sens_scalar"), "{err}");
}

#[test]
fn seed_is_mandatory() {
    let dir = TempDir::new().unwrap();
    let inst = query_instance(dir.path(), SensitivityModel::LowSensScalar { delta_inf: 5e-5 });
    let out = privlp(&["solve-scalar", "--instance", inst.to_str().unwrap(), "--epsilon", "1", "--delta", "1e-6"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn odd_n_balanced_gadget_is_refused() {
    let out = privlp(&["attack", "--gadget", "objective", "--n", "7", "--seed", "1"]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    let ok = privlp(&["attack", "--gadget", "scalar", "--n", "7", "--seed", "1"]);
    assert!(ok.status.success());
}

#[test]
fn exact_attack_reconstructs() {
    let text = stdout(&privlp(&["attack", "--gadget", "constraint", "--n", "12", "--trials", "3", "--seed", "4"]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["perfect_reconstructions"], 3);
}

#[test]
fn constraint_trace_replays() {
    let dir = TempDir::new().unwrap();
    let mut rng = rng_from_seed(21);
    let cover = random_covering_instance(5, 10, &mut rng).unwrap();
    let lp = PrivateLp {
        instance: cover.lp.to_instance(),
        sensitivity: SensitivityModel::HighSensConstraint,
    };
    let inst = write_instance(dir.path(), "cover.json", &lp);
    let trace = dir.path().join("trace.jsonl");
    stdout(&privlp(&[
        "solve-constraint", "--instance", inst.to_str().unwrap(), "--epsilon", "5", "--delta", "1e-6", "--alpha",
        "1", "--oracle", "exact", "--s", "3", "--seed", "8", "--trace", trace.to_str().unwrap(),
    ]));
    let lines = std::fs::read_to_string(&trace).unwrap();
    assert!(lines.lines().count() > 1);
    let text = stdout(&privlp(&["verify", "--replay", trace.to_str().unwrap()]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["consistent"], true);
}

#[test]
fn tampered_trace_fails_replay() {
    let dir = TempDir::new().unwrap();
    let inst = query_instance(dir.path(), SensitivityModel::LowSensScalar { delta_inf: 5e-5 });
    let trace = dir.path().join("trace.jsonl");
    stdout(&privlp(&[
        "solve-scalar", "--instance", inst.to_str().unwrap(), "--epsilon", "1", "--delta", "1e-6", "--alpha",
        "0.4", "--seed", "2", "--trace", trace.to_str().unwrap(),
    ]));
    let mut records: Vec<serde_json::Value> = std::fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let p = records[3]["distribution"][0].as_f64().unwrap();
    records[3]["distribution"][0] = serde_json::json!(p + 0.05);
    let tampered: String = records.iter().map(|r| format!("{r}\n")).collect();
    std::fs::write(&trace, tampered).unwrap();
    let out = privlp(&["verify", "--replay", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bound_reports_vacuous_and_finite() {
    let text = stdout(&privlp(&[
        "bound", "--kind", "scalar", "--epsilon", "1", "--sensitivity", "5e-5", "--d", "6", "--m", "12",
    ]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["vacuous"], false);
    let a = v["alpha"].as_f64().unwrap();
    assert!(a > 0.0 && a < 1.0);
    let text = stdout(&privlp(&[
        "bound", "--kind", "row", "--epsilon", "0.1", "--sensitivity", "0.01", "--d", "100", "--m", "100",
    ]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["vacuous"], true);
}

#[test]
fn verify_projection_suite_passes() {
    let dir = TempDir::new().unwrap();
    let seeds = dir.path().join("seeds.txt");
    std::fs::write(&seeds, "# test seeds\n1\n2\n3\n4\n").unwrap();
    let out = privlp(&["verify", "--suite", "projection", "--seed-file", seeds.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
