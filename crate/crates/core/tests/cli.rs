use std::fs;
use std::process::Command;

const CONFIG: &str = r#"
group = "torus2"
K = 3
b = 3.0
m_sq = 1.0
T = 20.0
dt = 0.15625

[data]
seed = 5
profile = "random"
decay_exponent = 2.0
amplitude = 0.05
"#;

fn dkg(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dkg")).args(args).output().unwrap()
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, CONFIG.replace("[data]", "bee = 1.0\n[data]")).unwrap();
    let out = dkg(&["linear-decay", "--config", cfg.to_str().unwrap(), "--output", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 9"), "{err}");
}

#[test]
fn mismatched_experiment_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, format!("experiment = \"gn-probe\"\n{CONFIG}")).unwrap();
    let out = dkg(&["linear-decay", "--config", cfg.to_str().unwrap(), "--output", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gn_probe_rejects_low_dimension() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let out = dkg(&["gn-probe", "--config", cfg.to_str().unwrap(), "--output", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn overdamped_linear_decay_and_seed_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, CONFIG).unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let run = |dir: &std::path::Path, seed: &str| {
        dkg(&["linear-decay", "--config", cfg.to_str().unwrap(), "--output", dir.to_str().unwrap(), "--seed", seed, "--quiet"])
    };
    assert_eq!(run(&a, "5").status.code(), Some(0));
    assert_eq!(run(&b, "6").status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    let rate = summary["result"]["fitted_rate"].as_f64().unwrap();
    assert!((rate - (-1.5 + 5f64.sqrt() / 2.0)).abs() < 0.02 * 0.382, "{rate}");
    assert_eq!(summary["config"]["data"]["seed"], 5);
    assert_ne!(fs::read(a.join("norms.csv")).unwrap(), fs::read(b.join("norms.csv")).unwrap());
    let header = fs::read_to_string(a.join("norms.csv")).unwrap();
    assert!(header.starts_with("t,l2_u,h1dot_u,l2_ut,d_envelope\n"));
}

#[test]
fn large_data_semilinear_run_fails_with_status_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    let text = CONFIG
        .replace("group = \"torus2\"", "group = \"torus3\"")
        .replace("K = 3", "K = 1")
        .replace("amplitude = 0.05", "amplitude = 500.0");
    fs::write(&cfg, text).unwrap();
    let out = dkg(&["semilinear-existence", "--config", cfg.to_str().unwrap(), "--output", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], false);
    assert!(summary["result"]["picard"]["failure"].is_string());
}
