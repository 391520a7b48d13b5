use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use covert_skg::channel::example_fig2;

const RUN: &str = r#"
seed = 11
trials = 200

[protocol]
n = 4
alpha = 0.3
kappa = 0.1
zeta = 0.1
mu = 0.5
codebooks = 4
sizing = { kind = "fixed", log_m1 = 1, log_m2 = 1, log_m3 = 0 }

[states]
kind = "constant-weight"
beta = 0.5
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_covert-skg"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, RUN).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let outs: Vec<_> = ["a", "b"].iter().map(|d| dir.path().join(d)).collect();
    for out in &outs {
        let o = run(&[
            "simulate",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--mode",
            "both",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    }
    for name in ["trials-oracle.jsonl", "trials-estimated.jsonl", "summary.csv"] {
        let a = fs::read(outs[0].join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, fs::read(outs[1].join(name)).unwrap(), "{name}");
    }
    let summary = fs::read_to_string(outs[0].join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn constant_weight_states_have_half_weight_in_every_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("o");
    let o = run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(out.join("trials-oracle.jsonl")).unwrap();
    let mut records = 0;
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["state_weight"], 2, "n' = 5 gives floor(5 / 2)");
        records += 1;
    }
    assert_eq!(records, 200);
}

#[test]
fn malformed_channel_is_a_parse_failure() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "y_size = 2\nz_size = 2\nx0_s0 = [0.5, 0.5]\n").unwrap();
    let o = run(&["rates", "--channel", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 3);

    // well formed, but the zero-input law depends on the state
    let mut spec: toml::Table = toml::from_str(&example_fig2().to_spec_string()).unwrap();
    spec.insert("x0_s1".into(), toml::Value::try_from(vec![0.5, 0.2, 0.2, 0.1]).unwrap());
    let wrong = dir.path().join("wrong.toml");
    fs::write(&wrong, toml::to_string(&spec).unwrap()).unwrap();
    let o = run(&["rates", "--channel", wrong.to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn corrupted_bound_is_detected() {
    let ok = run(&["verify-lemma1", "--seed", "5", "--trials", "20000"]);
    assert_eq!(code(&ok), 0);
    let bad = run(&[
        "verify-lemma1",
        "--seed",
        "5",
        "--trials",
        "20000",
        "--bound-scale",
        "0.0001",
    ]);
    assert_eq!(code(&bad), 6);
    assert!(String::from_utf8_lossy(&bad.stdout).contains(",fail"));
}

#[test]
fn two_point_rate_grid_meets_at_the_endpoints() {
    let o = run(&["rates", "--grid", "2"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][0], rows[1][0]), ("0", "1"));
    for r in &rows {
        assert_eq!(r[1], r[2]);
    }
    let r0: f64 = rows[0][1].parse().unwrap();
    assert!((r0 - 8.784753853889491).abs() < 1e-9);
}

#[test]
fn seed_is_mandatory_outside_rates() {
    let o = run(&["verify-oneshot"]);
    assert_eq!(code(&o), 3);
    let o = run(&["verify-oneshot", "--seed", "1", "--trials", "50"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn guard_violations_have_their_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("big.toml");
    fs::write(&cfg, RUN.replace("log_m1 = 1", "log_m1 = 40")).unwrap();
    let o = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 5, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn derandomize_and_estimator_commands_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("d.toml");
    fs::write(
        &cfg,
        "[derandomize]\nn = 3\nm1 = 2\nm2 = 2\nalpha = 0.3\nfamily = 32\nsubset_size = 20\nepsilon_prime = 0.6\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = run(&[
        "derandomize",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(out.join("derandomize.csv")).unwrap().lines().count(),
        9
    );
    assert!(out.join("derandomize.json").exists());

    let o = run(&["estimate-beta", "--seed", "2", "--trials", "300"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}
