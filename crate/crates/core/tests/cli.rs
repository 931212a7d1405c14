use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;
use xlmimo::output::{read_results, RESULT_COLUMNS};

const SWEEP: &str = r#"
experiment = "small"
seed = 11
trials = 40
snr_db = [0.0, 10.0]
receivers = ["mrc", "lmmse"]
architectures = ["phase-shifter", "on-off", "random-phase"]

[geometry]
num_antennas = 64
num_subarrays = 8

[scenario]
kind = "random"
num_users = 3
vr_length = 16
"#;

fn xlmimo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xlmimo"))
        .args(args)
        .args(["--out", dir.join("out").to_str().unwrap()])
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn sweep_writes_documented_schema() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "s.toml", SWEEP);
    let o = xlmimo(&["sweep", &cfg], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));

    let csv = dir.path().join("out/small.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), RESULT_COLUMNS.join(","));

    let rows = read_results(&csv).unwrap();
    // 3 architectures × 2 receivers × 2 methods × 2 SNRs × (3 users + SUM)
    assert_eq!(rows.len(), 3 * 2 * 2 * 2 * 4);
    for r in &rows {
        assert_eq!(r.seed, 11);
        assert_eq!(r.ee.is_some(), r.is_sum());
        assert!(r.se.is_finite() && r.se >= 0.0);
        assert!(r.power_mw > 0.0);
    }
    let on_off = rows.iter().find(|r| r.architecture == "on-off").unwrap();
    let ps = rows.iter().find(|r| r.architecture == "phase-shifter").unwrap();
    assert!(on_off.power_mw < ps.power_mw);

    // Per-user SE adds up to the SUM row.
    for sum in rows.iter().filter(|r| r.is_sum()) {
        let parts: f64 = rows
            .iter()
            .filter(|r| {
                !r.is_sum()
                    && r.snr_db == sum.snr_db
                    && r.method == sum.method
                    && r.receiver == sum.receiver
                    && r.architecture == sum.architecture
            })
            .map(|r| r.se)
            .sum();
        assert!((parts - sum.se).abs() < 1e-9 * sum.se.max(1.0));
    }

    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/small.json")).unwrap()).unwrap();
    assert_eq!(sidecar["schema_version"], 1);
    assert_eq!(sidecar["config"]["seed"], 11);
    assert_eq!(sidecar["columns"].as_array().unwrap().len(), RESULT_COLUMNS.len());
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "s.toml", SWEEP);
    let read = |seed: &str| {
        let o = xlmimo(&["sweep", &cfg, "--seed", seed], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(dir.path().join("out/small.csv")).unwrap()
    };
    let a = read("5");
    let b = read("5");
    let c = read("6");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "s.toml", SWEEP);
    let read = |threads: &str| {
        let o = xlmimo(&["--threads", threads, "sweep", &cfg], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(dir.path().join("out/small.csv")).unwrap()
    };
    assert_eq!(read("1"), read("3"));
}

#[test]
fn closed_form_runs_with_zero_trials() {
    let dir = TempDir::new().unwrap();
    let text = SWEEP.replace("trials = 40", "trials = 0\nmethods = [\"closed-form\"]");
    let cfg = write_config(&dir, "cf.toml", &text);
    let o = xlmimo(&["sweep", &cfg], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_results(&dir.path().join("out/small.csv")).unwrap();
    assert!(rows.iter().all(|r| r.method == "closed-form" && r.stderr == 0.0));
}

#[test]
fn invalid_config_exits_with_one_and_names_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.toml", &SWEEP.replace("num_subarrays = 8", "num_subarrays = 7"));
    let o = xlmimo(&["validate", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("geometry"), "{}", stderr(&o));

    let cfg = write_config(&dir, "typo.toml", &SWEEP.replace("trials", "trails"));
    let o = xlmimo(&["sweep", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("trails"), "{}", stderr(&o));

    let o = xlmimo(&["sweep", dir.path().join("missing.toml").to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_reports_dimensions() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "s.toml", SWEEP);
    let o = xlmimo(&["validate", &cfg], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("M = 64") && out.contains("N = 8") && out.contains("K = 3"), "{out}");
    assert!(!dir.path().join("out").exists());
}

const SCHEDULE: &str = r#"
experiment = "sched"
seed = 4
methods = ["closed-form"]
trials = 0
snr_db = [20.0]
receivers = ["mrc"]
architectures = ["phase-shifter", "on-off"]

[geometry]
num_antennas = 64
num_subarrays = 8

[scenario]
kind = "random"
num_users = 6
vr_length = 16

[schedule]
algorithm = "user"
n_u = 3
"#;

#[test]
fn schedule_writes_decisions_and_outcomes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "sched.toml", SCHEDULE);
    let o = xlmimo(&["schedule", &cfg], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    for f in ["sched.csv", "sched_schedule.csv", "sched_vr_map.csv", "sched_outcomes.json", "sched.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let decisions = std::fs::read_to_string(out.join("sched_schedule.csv")).unwrap();
    // header + 2 architectures × 6 users
    assert_eq!(decisions.lines().count(), 1 + 2 * 6);
    let vr = std::fs::read_to_string(out.join("sched_vr_map.csv")).unwrap();
    assert_eq!(vr.lines().count(), 1 + 6);

    let runs: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("sched_outcomes.json")).unwrap()).unwrap();
    for run in runs.as_array().unwrap() {
        let users = run["outcome"]["scheduled_users"].as_array().unwrap();
        assert!(!users.is_empty() && users.len() <= 3);
    }
}

#[test]
fn zero_users_scheduled_gives_empty_outcome() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "zero.toml", &SCHEDULE.replace("n_u = 3", "n_u = 0"));
    let o = xlmimo(&["schedule", &cfg], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_results(&dir.path().join("out/sched.csv")).unwrap();
    assert!(rows.iter().all(|r| r.is_sum() && r.se == 0.0));
}

#[test]
fn joint_schedule_and_oracle_agree_on_small_instance() {
    let dir = TempDir::new().unwrap();
    let text = SCHEDULE
        .replace("algorithm = \"user\"", "algorithm = \"joint\"\nsub_min = 1\nsub_max = 2\nmode = \"exhaustive_vr\"")
        .replace("n_u = 3", "n_u = 2");
    let cfg = write_config(&dir, "joint.toml", &text);
    let o = xlmimo(&["oracle", &cfg], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("out/sched_oracle.csv")).unwrap();
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().unwrap().clone();
    let ratio = headers.iter().position(|h| h == "ratio").unwrap();
    for rec in r.records() {
        let v: f64 = rec.unwrap()[ratio].parse().unwrap();
        assert!(v > 0.0 && v <= 1.0 + 1e-9, "ratio {v}");
    }
}

#[test]
fn oracle_without_schedule_compares_closed_form_to_monte_carlo() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "s.toml", SWEEP);
    let o = xlmimo(&["oracle", &cfg], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("out/small_oracle.csv")).unwrap();
    assert!(text.starts_with("experiment,snr_db,receiver,architecture,user,monte_carlo,stderr,closed_form,rel_error"));
    // 3 architectures × 2 receivers × 2 SNRs × (3 users + SUM)
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 2 * 4);
}

#[test]
fn oversized_exhaustive_search_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let text = SCHEDULE
        .replace("num_users = 6", "num_users = 40")
        .replace("n_u = 3", "n_u = 20");
    let cfg = write_config(&dir, "big.toml", &text);
    let o = xlmimo(&["oracle", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
