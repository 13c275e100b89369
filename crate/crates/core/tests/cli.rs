use std::path::Path;
use std::process::{Command, Output};

use mfchaos::artifact::Artifact;
use mfchaos::cmkv::MeanFieldArtifact;

const FAST: [&str; 14] = [
    "--set",
    "solver.q=16",
    "--set",
    "solver.kernel_step=0.25",
    "--set",
    "bench.n_list=[2, 3]",
    "--set",
    "bench.rate_n_list=[16, 32, 64]",
    "--set",
    "bench.mn_trials=200",
    "--set",
    "bench.operator_samples=10",
    "--set",
    "bench.lift_draws=200",
];

fn mfchaos(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfchaos"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

#[test]
fn validate_model_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfchaos(dir.path(), &["validate-model"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("γ   = 1"));
    assert!(dir.path().join("model.json").exists());
}

#[test]
fn constant_reward_mean_field_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfchaos(
        dir.path(),
        &["solve-mkv", "--set", "solver.q=10", "--set", "reward.family=\"constant\"", "--set", "reward.params={ value = 1.0 }"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let art: Artifact<MeanFieldArtifact> = Artifact::read(&dir.path().join("mean_field.json")).unwrap();
    assert_eq!(art.kind, "mean_field_solution");
    assert_eq!(art.body.nodes.len(), 11);
    assert!(art.body.nodes.iter().all(|n| (n.value - 2.0).abs() < 1e-7));
    assert_eq!(art.config["solver"]["q"], 10);
}

#[test]
fn lift_reads_a_saved_policy() {
    let dir = tempfile::tempdir().unwrap();
    assert!(mfchaos(dir.path(), &["solve-mkv", "--set", "solver.q=12"]).status.success());
    let policy = dir.path().join("mean_field.json");
    let o = mfchaos(dir.path(), &["lift", "--n", "3", "--mode", "randomized", "--x0", "0,1,1", "--policy", policy.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("lift_3_randomized.json").exists());
    let o = mfchaos(dir.path(), &["lift", "--n", "3", "--x0", "0,1", "--policy", policy.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_output_is_identical_across_runs_and_workers() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut a1 = FAST.to_vec();
    a1.extend(["--workers", "1", "bench-chaos"]);
    let mut a2 = FAST.to_vec();
    a2.extend(["--workers", "4", "bench-chaos"]);
    let (o1, o2) = (mfchaos(d1.path(), &a1), mfchaos(d2.path(), &a2));
    assert!(o1.status.success(), "{}", String::from_utf8_lossy(&o1.stderr));
    assert!(o2.status.success());
    assert_eq!(o1.stdout, o2.stdout);
    for f in ["value_convergence.csv", "policy_gap.csv", "lift_coupling.csv", "operator_comparison.csv", "mn_rate.csv", "summary.json"] {
        assert_eq!(std::fs::read(d1.path().join(f)).unwrap(), std::fs::read(d2.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_flag_changes_monte_carlo_output() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        let o = mfchaos(dir.path(), &["estimate-mn", "--n", "200,400,800", "--trials", "300", "--seed", seed]);
        assert!(o.status.success());
        std::fs::read_to_string(dir.path().join("mn.json")).unwrap()
    };
    let (a, b, c) = (run("1"), run("1"), run("2"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn unknown_config_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfchaos(dir.path(), &["validate-model", "--set", "solver.nonsense=3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));
}

#[test]
fn cap_violation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfchaos(dir.path(), &["solve-mkv", "--set", "solver.q=10000000"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("model.toml");
    let text = mfchaos::config::REFERENCE_TOML.replace("beta = 0.5", "beta = 0.25");
    std::fs::write(&cfg, text).unwrap();
    let o = mfchaos(dir.path(), &["validate-model", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    assert_eq!(report["body"]["beta"], 0.25);
}
