use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BASE: &str = r#"
[system]
a = [[0.9]]
c = [[0.7]]
q = [[0.8]]
r = [[0.8]]
pi0 = [[1.0]]

[channel]
lambda = 0.7

[energy]
p_gg = 0.7
p_bg = 0.2
good = [0.1, 0.2, 0.3, 0.4]
bad = [0.4, 0.3, 0.2, 0.1]
b_max = 3

[mdp]
n_trunc = 12

[thresholds]
r_good = 1
r_bad = 2

[sim]
horizon = 200
replications = 16
master_seed = 5
record_stride = 20
"#;

fn run(args: &[&str], config_text: &str, dir: &Path) -> (Output, PathBuf) {
    let config = dir.join("exp.toml");
    fs::write(&config, config_text).unwrap();
    let out = dir.join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_eh-estimation"))
        .args(args)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    (output, out)
}

fn stdout_value(output: &Output, key: &str) -> String {
    let text = String::from_utf8_lossy(&output.stdout);
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing from\n{text}"))
        .to_string()
}

#[test]
fn solve_reports_cost_above_floor() {
    let dir = tempfile::tempdir().unwrap();
    let (output, out) = run(&["solve"], BASE, dir.path());
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let j: f64 = stdout_value(&output, "avg_cost").parse().unwrap();
    assert!(j >= 0.757654);
    assert!(out.join("solve/policy.csv").exists());
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.lines().any(|l| l.starts_with("config_sha256=") && l.len() == 14 + 64));
}

#[test]
fn empty_battery_never_transmits() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE
        .replace("good = [0.1, 0.2, 0.3, 0.4]", "good = [1.0]")
        .replace("bad = [0.4, 0.3, 0.2, 0.1]", "bad = [1.0]")
        .replace("b_max = 3", "b_max = 0")
        .replace("r_good = 1\nr_bad = 2", "r_good = 0\nr_bad = 0");
    let (output, out) = run(&["solve"], &text, dir.path());
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let mut reader = csv::Reader::from_path(out.join("solve/policy.csv")).unwrap();
    let mut rows = 0;
    for rec in reader.records() {
        assert_eq!(&rec.unwrap()[4], "0");
        rows += 1;
    }
    assert_eq!(rows, 2 * 13);
}

#[test]
fn malformed_probabilities_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.replace("bad = [0.4, 0.3, 0.2, 0.1]", "bad = [0.4, 0.3, 0.2, 0.2]");
    let (output, _) = run(&["solve"], &text, dir.path());
    assert!(!output.status.success());
    let err = String::from_utf8_lossy(&output.stderr);
    assert!(err.contains("energy.bad"), "{err}");
}

#[test]
fn psi_requires_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.replace("[thresholds]\nr_good = 1\nr_bad = 2\n", "");
    let (output, out) = run(&["psi"], &text, dir.path());
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("thresholds"));
    assert!(!out.join("manifest.txt").exists());
}

#[test]
fn frozen_environment_gives_block_diagonal_psi() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.replace("p_gg = 0.7\np_bg = 0.2", "p_gg = 1.0\np_bg = 0.0");
    let (output, out) = run(&["psi"], &text, dir.path());
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let mut reader = csv::Reader::from_path(out.join("psi/psi.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let from = rec[0].chars().last().unwrap();
        let mut sum = 0.0;
        for (label, v) in header[1..].iter().zip(rec.iter().skip(1)) {
            let v: f64 = v.parse().unwrap();
            sum += v;
            if label.chars().last().unwrap() != from {
                assert_eq!(v, 0.0, "{} -> {label}", &rec[0]);
            }
        }
        assert!((sum - 1.0).abs() < 1e-12);
    }
}

#[test]
fn single_policy_compare_has_no_pair_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BASE}\n[compare]\npolicies = [\"threshold\"]\n");
    let (output, out) = run(&["compare"], &text, dir.path());
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let summary = fs::read_to_string(out.join("sim/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2, "{summary}");
    assert!(out.join("sim/threshold.csv").exists());
    assert!(!out.join("sim/greedy.csv").exists());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let read = |seed: &str, sub: &str| {
        let d = dir.path().join(sub);
        fs::create_dir_all(&d).unwrap();
        let (output, out) = run(&["simulate", "--policy", "greedy", "--seed", seed], BASE, &d);
        assert!(output.status.success());
        (
            fs::read(out.join("sim/greedy.csv")).unwrap(),
            fs::read_to_string(out.join("manifest.txt")).unwrap(),
        )
    };
    let (a, manifest) = read("17", "a");
    let (b, _) = read("17", "b");
    let (c, _) = read("18", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(manifest.contains("master_seed=17\n"));
    assert!(manifest.contains("policy=greedy\n"));
}

#[test]
fn sweep_lists_every_pair() {
    let dir = tempfile::tempdir().unwrap();
    let (output, out) = run(&["sweep"], BASE, dir.path());
    assert!(output.status.success());
    let rows = csv::Reader::from_path(out.join("sweep/thresholds.csv")).unwrap().records().count();
    assert_eq!(rows, 16);
    let best: f64 = stdout_value(&output, "best_cost").parse().unwrap();
    let optimal: f64 = stdout_value(&output, "optimal_cost").parse().unwrap();
    assert!(optimal <= best);
}

#[test]
fn unknown_subcommand_fails() {
    let output = Command::new(env!("CARGO_BIN_EXE_eh-estimation")).arg("plot").output().unwrap();
    assert!(!output.status.success());
}
