//! End-to-end tests of the `svgd` binary: exit codes, artifact determinism, and
//! agreement between the checked-in configs and the canonical constructors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use svgd_core::harness::ExperimentConfig;

const BIN: &str = env!("CARGO_BIN_EXE_svgd");

fn small_config(seed: u64) -> String {
    format!(
        r#"{{
  "target": {{"family": "gaussian", "mean": [0.0], "covariance": [[1.0]]}},
  "kernel": {{"family": "gaussian_rbf", "bandwidth": 1.0}},
  "init": {{"dist": {{"family": "gaussian", "mean": [0.0], "covariance": [[4.0]]}}, "n": 10, "seed": {seed}}},
  "steps": {{"policy": "constant", "eps": 0.03333333333333333, "rounds": 3}},
  "reference": {{"mode": "ensemble", "n_ref": 30, "seed": 99}}
}}"#
    )
}

/// Fresh scratch directory unique to a test.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("svgd_cli_{name}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn svgd(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn run_writes_identical_artifacts_on_repeat_invocations() {
    let dir = scratch("run_twice");
    let config = write_config(&dir, &small_config(7));
    let out_a = dir.join("a");
    let out_b = dir.join("b");

    for out_dir in [&out_a, &out_b] {
        let out = svgd(&["run", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
        let text = stdout(&out);
        assert!(text.contains("hard checks"), "summary missing verdicts:\n{text}");
        assert!(text.contains("PASS"), "run did not pass:\n{text}");
    }

    for name in ["run_record.json", "run_rounds.csv", "run_particles.csv", "run_reference.csv"] {
        let a = fs::read(out_a.join(name)).unwrap_or_else(|_| panic!("{name} missing"));
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical invocations");
    }
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn seed_flag_overrides_the_config_seed() {
    let dir = scratch("seed_flag");
    let config = write_config(&dir, &small_config(7));
    let base = dir.join("base");
    let with_seed = dir.join("seeded");
    let with_seed_again = dir.join("seeded_again");

    for (out_dir, extra) in [
        (&base, None),
        (&with_seed, Some("123")),
        (&with_seed_again, Some("123")),
    ] {
        let mut args = vec!["run", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
        if let Some(seed) = extra {
            args.extend(["--seed", seed]);
        }
        assert!(svgd(&args).status.success());
    }

    let base_rec = fs::read(base.join("run_record.json")).unwrap();
    let seeded = fs::read(with_seed.join("run_record.json")).unwrap();
    let seeded_again = fs::read(with_seed_again.join("run_record.json")).unwrap();
    assert_eq!(seeded, seeded_again, "seed override is not deterministic");
    assert_ne!(base_rec, seeded, "seed override had no effect");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn verify_passes_on_a_sane_config() {
    let dir = scratch("verify_ok");
    let config = write_config(&dir, &small_config(11));
    let out = svgd(&["verify", config.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("verdict: PASS"), "unexpected report:\n{text}");
    assert!(text.contains("kernel-constants-grid"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn verify_exits_two_when_the_step_cap_is_exceeded() {
    let dir = scratch("verify_cap");
    let over_cap = small_config(11).replace("0.03333333333333333", "0.2");
    let config = write_config(&dir, &over_cap);
    let out = svgd(&["verify", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "expected check-failure exit code");
    let text = stdout(&out);
    assert!(text.contains("step-cap"), "report should name the failing check:\n{text}");
    assert!(text.contains("FAIL"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn constants_emits_machine_readable_json() {
    let dir = scratch("constants");
    let config = write_config(&dir, &small_config(11));
    let out = svgd(&["constants", config.to_str().unwrap(), "--json"]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(value["constants"]["c"], 12.0);
    let kl0 = value["constants"]["kl0"].as_f64().unwrap();
    assert!(
        (kl0 - 0.5 * (3.0 - 4.0f64.ln())).abs() < 1e-12,
        "kl0 = {kl0} should be the closed-form divergence"
    );
    assert!(value["r_alpha1"]["r"].as_f64().unwrap() > 0.0);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn sweep_is_deterministic_and_checks_the_rate() {
    let dir = scratch("sweep");
    let config = write_config(&dir, &small_config(11));
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out_dir in [&out_a, &out_b] {
        let out = svgd(&[
            "sweep",
            config.to_str().unwrap(),
            "--n",
            "8,16",
            "--repeats",
            "2",
            "--delta",
            "0.5",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains("verdict: PASS"));
    }
    let csv = fs::read_to_string(out_a.join("run_rate.csv")).unwrap();
    assert!(csv.starts_with("n,repeat,seed,w_bar,budget_b,steps,min_ksd,rate_rhs,pass"));
    assert_eq!(csv.lines().count(), 5, "two counts x two repeats plus header");
    assert_eq!(
        fs::read(out_a.join("run_rate.csv")).unwrap(),
        fs::read(out_b.join("run_rate.csv")).unwrap()
    );
    assert_eq!(
        fs::read(out_a.join("run_rate.json")).unwrap(),
        fs::read(out_b.join("run_rate.json")).unwrap()
    );
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn missing_config_is_an_operational_error() {
    let out = svgd(&["run", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn checked_in_configs_match_the_canonical_constructors() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    for (file, canonical) in [
        ("configs/reference.json", ExperimentConfig::reference_ensemble()),
        ("configs/reference_quadrature.json", ExperimentConfig::reference_quadrature()),
    ] {
        let parsed = ExperimentConfig::from_path(&root.join(file)).unwrap();
        assert_eq!(
            serde_json::to_value(&parsed).unwrap(),
            serde_json::to_value(&canonical).unwrap(),
            "{file} drifted from the canonical configuration"
        );
    }
}
