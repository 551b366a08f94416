use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use funnelback_cli::csvlog;
use funnelback_core::presets::{paper_sim, scalar_demo};
use funnelback_core::{SimConfig, TrajectoryLog};

const BIN: &str = env!("CARGO_BIN_EXE_funnelback");

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn funnelback(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_csv(path: &Path) -> TrajectoryLog {
    csvlog::read(fs::File::open(path).unwrap()).unwrap().0
}

fn short(t_final: f64) -> SimConfig {
    SimConfig {
        t_final,
        ..SimConfig::default()
    }
}

#[test]
fn preset_config_reproduces_the_built_in_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("paper-sim.toml");
    let o = funnelback(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--t-final",
        "0.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let expected = paper_sim(short(0.5)).run();
    for (label, result) in ["identity", "tangent", "rational"].iter().zip(&expected) {
        let from_csv = read_csv(&dir.path().join(format!("{label}.csv")));
        assert_eq!(&from_csv, result.as_ref().unwrap(), "{label}");
    }
    for name in ["y", "x2", "u", "theta_hat", "rho_hat", "parameters"] {
        let svg = fs::read_to_string(dir.path().join(format!("{name}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("<polyline"), "{name}");
    }
}

#[test]
fn scalar_config_matches_the_preset() {
    let dir = tempfile::tempdir().unwrap();
    let o = funnelback(&[
        "run",
        "--preset",
        "scalar-demo",
        "--t-final",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let expected = scalar_demo(short(2.0)).run();
    assert_eq!(&read_csv(&dir.path().join("scalar.csv")), expected[0].as_ref().unwrap());
}

#[test]
fn summary_violations_match_a_rescan_of_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = funnelback(&[
        "run",
        "--preset",
        "paper-sim",
        "--t-final",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let runs = summary["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    let mut saw_violations = false;
    for run in runs {
        let label = run["label"].as_str().unwrap();
        let log = read_csv(&dir.path().join(run["csv"].as_str().unwrap()));
        let rescan = log.rows.iter().filter(|r| r.x[0].abs() >= r.funnel_bound).count();
        assert_eq!(run["funnel_violations"].as_u64().unwrap() as usize, rescan, "{label}");
        assert_eq!(run["rows"].as_u64().unwrap() as usize, log.rows.len());
        if label == "identity" {
            assert_eq!(run["funnel_check"], "not applicable");
            saw_violations = rescan > 0;
        } else {
            assert_eq!(run["funnel_check"], "pass");
        }
    }
    // x1(0) = 1 already sits on the boundary of the identity run's funnel.
    assert!(saw_violations);
}

#[test]
fn negative_gain_is_rejected_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let src = fs::read_to_string(config("scalar-demo.toml"))
        .unwrap()
        .replace("k = [1.0]", "k = [-1.0]");
    let line = src.lines().position(|l| l.contains("k = [-1.0]")).unwrap() + 1;
    let path = dir.path().join("bad.toml");
    fs::write(&path, &src).unwrap();
    let o = funnelback(&["run", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(&format!("bad.toml:{line}: k1 must be positive, got -1")), "{err}");
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn injected_misprint_fails_the_jacobian_check() {
    let o = funnelback(&["verify", "--preset", "paper-sim", "--t-final", "0.2", "--inject-pi-typo"]);
    assert!(!o.status.success());
    let out = stdout(&o);
    let row = out
        .lines()
        .find(|l| l.starts_with("rational") && l.contains("jacobian dz/dx"))
        .unwrap();
    assert!(row.contains(" fail "), "{row}");
    for other in ["identity", "tangent"] {
        let row = out
            .lines()
            .find(|l| l.starts_with(other) && l.contains("jacobian dz/dx"))
            .unwrap();
        assert!(row.contains(" pass "), "{row}");
    }
}

#[test]
fn verify_marks_identity_containment_not_applicable() {
    let o = funnelback(&["verify", "--preset", "paper-sim", "--t-final", "0.2"]);
    let out = stdout(&o);
    assert!(o.status.success(), "{out}");
    let row = out
        .lines()
        .find(|l| l.starts_with("identity") && l.contains("funnel containment"))
        .unwrap();
    assert!(row.contains("not applicable"), "{row}");
    assert!(out.contains("all checks passed"));
}

#[test]
fn scalar_verify_checks_the_lyapunov_function() {
    let o = funnelback(&["verify", "--preset", "scalar-demo", "--t-final", "5"]);
    let out = stdout(&o);
    assert!(o.status.success(), "{out}");
    let row = out.lines().find(|l| l.contains("lyapunov nonincreasing")).unwrap();
    assert!(row.contains(" pass "), "{row}");
}
