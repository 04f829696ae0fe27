//! End-to-end tests of the `asyncnet` binary: exit-code contract, output
//! determinism, and thread-count independence.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_asyncnet"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn tiny_atc_config() -> &'static str {
    r#"{
        "model": {
            "dim": 3,
            "w_o": [0.6, -0.4, 0.2],
            "agents": [
                {"r_u": {"type": "identity"}, "sigma_v2": 0.01},
                {"r_u": {"type": "identity"}, "sigma_v2": 0.02},
                {"r_u": {"type": "identity"}, "sigma_v2": 0.03}
            ]
        },
        "strategy": {
            "kind": "atc",
            "step_size": {"type": "constant", "mu": 0.01},
            "combination": {
                "topology": {"type": "metropolis", "size": 3, "edges": [[0,1],[1,2],[2,0]]}
            }
        },
        "experiment": {"runs": 8, "iterations": 1500, "seed": 3}
    }"#
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

#[test]
fn simulate_is_byte_deterministic_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "cfg.json", tiny_atc_config());

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let out_c = dir.path().join("c");
    let start = std::time::Instant::now();
    for (out, threads) in [(&out_a, "1"), (&out_b, "1"), (&out_c, "4")] {
        let status = run(bin()
            .args(["simulate", "-c"])
            .arg(&config)
            .arg("-o")
            .arg(out)
            .args(["--threads", threads, "--svg"]))
        .status;
        assert!(status.success());
    }
    // Small configurations must stay interactive.
    assert!(start.elapsed().as_secs_f64() < 10.0);
    for name in ["report.json", "curves.csv", "curves.svg"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        let c = fs::read(out_c.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
        assert_eq!(a, c, "{name} depends on thread count");
    }
    // CSV header shape.
    let csv = fs::read_to_string(out_a.join("curves.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "iteration,agent,msd");
    assert!(csv.lines().any(|l| l.starts_with("0,network,")));
}

#[test]
fn seed_flag_and_env_are_honored() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "cfg.json", tiny_atc_config());
    let base = dir.path().join("base");
    let flagged = dir.path().join("flagged");
    let env_out = dir.path().join("env");

    assert!(run(bin().args(["simulate", "-c"]).arg(&config).arg("-o").arg(&base)).status.success());
    assert!(run(bin()
        .args(["simulate", "-c"])
        .arg(&config)
        .arg("-o")
        .arg(&flagged)
        .args(["--seed", "99"]))
    .status
    .success());
    assert!(run(bin()
        .args(["simulate", "-c"])
        .arg(&config)
        .arg("-o")
        .arg(&env_out)
        .env("ASYNCNET_SEED", "99"))
    .status
    .success());

    let base_report = fs::read(base.join("report.json")).unwrap();
    let flag_report = fs::read(flagged.join("report.json")).unwrap();
    let env_report = fs::read(env_out.join("report.json")).unwrap();
    assert_ne!(base_report, flag_report, "seed override must change results");
    // Precedence is flag > environment > config seed, so the env run matches
    // the equal-valued flag run, not the base run.
    assert_eq!(flag_report, env_report);
    assert_ne!(base_report, env_report);

    // The flag beats the environment.
    let both = dir.path().join("both");
    assert!(run(bin()
        .args(["simulate", "-c"])
        .arg(&config)
        .arg("-o")
        .arg(&both)
        .args(["--seed", "3"])
        .env("ASYNCNET_SEED", "99"))
    .status
    .success());
    assert_eq!(fs::read(both.join("report.json")).unwrap(), base_report);
}

#[test]
fn config_errors_exit_two_with_field_diagnostics() {
    let dir = tempfile::tempdir().unwrap();

    // Non-left-stochastic combination matrix: names the offending column.
    let bad = tiny_atc_config().replace(
        r#"{"type": "metropolis", "size": 3, "edges": [[0,1],[1,2],[2,0]]}"#,
        r#"{"type": "dense", "rows": [[0.5,0.3,0.2],[0.4,0.3,0.4],[0.0,0.4,0.4]]}"#,
    );
    let config = write_config(dir.path(), "bad.json", &bad);
    let out = run(bin().args(["theory", "-c"]).arg(&config));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("column 0"), "stderr: {stderr}");

    // Malformed JSON: line/column diagnostics.
    let config = write_config(dir.path(), "syntax.json", "{\"model\": ");
    let out = run(bin().args(["theory", "-c"]).arg(&config));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));

    // Unknown demo lists the available ones.
    let out = run(bin().args(["demo", "does-not-exist"]));
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nfold"), "stderr: {stderr}");
}

#[test]
fn math_preconditions_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    // A two-cycle is left-stochastic but periodic, hence not primitive.
    let bad = tiny_atc_config()
        .replace(
            r#"{"type": "metropolis", "size": 3, "edges": [[0,1],[1,2],[2,0]]}"#,
            r#"{"type": "dense", "rows": [[0.0,1.0],[1.0,0.0]]}"#,
        )
        .replace(r#""dim": 3"#, r#""dim": 2"#)
        .replace(r#""w_o": [0.6, -0.4, 0.2]"#, r#""w_o": [0.6, -0.4]"#)
        .replace(
            r#"{"r_u": {"type": "identity"}, "sigma_v2": 0.01},
                {"r_u": {"type": "identity"}, "sigma_v2": 0.02},
                {"r_u": {"type": "identity"}, "sigma_v2": 0.03}"#,
            r#"{"r_u": {"type": "identity"}, "sigma_v2": 0.01},
                {"r_u": {"type": "identity"}, "sigma_v2": 0.02}"#,
        );
    let config = write_config(dir.path(), "cycle.json", &bad);
    let out = run(bin().args(["theory", "-c"]).arg(&config));
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("primitive"));
}

#[test]
fn divergence_exits_four_and_flags_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "diverge.json",
        &fs::read_to_string(
            Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/consensus-diverge.json"),
        )
        .unwrap(),
    );
    let out_dir = dir.path().join("out");
    let out = run(bin().args(["simulate", "-c"]).arg(&config).arg("-o").arg(&out_dir));
    assert_eq!(out.status.code(), Some(4));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert!(report["diverged"].is_object(), "report: {report}");
}

#[test]
fn single_agent_and_singleton_network_theory_agree() {
    let dir = tempfile::tempdir().unwrap();
    let single = r#"{
        "model": {"dim": 4, "w_o": [0.5, 0.5, 0.5, 0.5],
                  "agents": [{"r_u": {"type": "identity"}, "sigma_v2": 0.01}]},
        "strategy": {"kind": "ncop", "step_size": {"type": "constant", "mu": 0.002}},
        "experiment": {"runs": 1, "iterations": 100, "seed": 1}
    }"#;
    let network = r#"{
        "model": {"dim": 4, "w_o": [0.5, 0.5, 0.5, 0.5],
                  "agents": [{"r_u": {"type": "identity"}, "sigma_v2": 0.01}]},
        "strategy": {"kind": "atc", "step_size": {"type": "constant", "mu": 0.002},
                     "combination": {"topology": {"type": "dense", "rows": [[1.0]]}}},
        "experiment": {"runs": 1, "iterations": 100, "seed": 1}
    }"#;
    let single_cfg = write_config(dir.path(), "single.json", single);
    let network_cfg = write_config(dir.path(), "network.json", network);

    let single_out = run(bin().args(["theory", "-c"]).arg(&single_cfg));
    let network_out = run(bin().args(["theory", "-c"]).arg(&network_cfg));
    assert!(single_out.status.success());
    assert!(network_out.status.success());
    let s: serde_json::Value = serde_json::from_slice(&single_out.stdout).unwrap();
    let n: serde_json::Value = serde_json::from_slice(&network_out.stdout).unwrap();
    let (s_msd, n_msd) = (s["msd"].as_f64().unwrap(), n["msd"].as_f64().unwrap());
    assert!(((s_msd - n_msd) / s_msd).abs() < 1e-9, "{s_msd} vs {n_msd}");
    let (s_rate, n_rate) = (s["rate"].as_f64().unwrap(), n["rate"].as_f64().unwrap());
    assert!((s_rate - n_rate).abs() < 1e-9);
}

#[test]
fn compare_single_agent_config_includes_emse_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/single-lms.json");
    let out_dir = dir.path().join("out");
    let out = run(bin().args(["compare", "-c"]).arg(&config).arg("-o").arg(&out_dir));
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let theory: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("theory.json")).unwrap()).unwrap();
    // Single LMS learner: MSD = EMSE = mu * M * sigma_v^2 = 1e-4.
    let msd = theory["msd"].as_f64().unwrap();
    assert!((msd - 1e-4).abs() < 1e-12, "theory msd {msd}");
    assert!((theory["emse"].as_f64().unwrap() - 1e-4).abs() < 1e-12);

    let cmp: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("comparison.json")).unwrap())
            .unwrap();
    let rows = cmp["rows"].as_array().unwrap();
    let quantities: Vec<&str> = rows.iter().map(|r| r["quantity"].as_str().unwrap()).collect();
    assert!(quantities.contains(&"msd"));
    assert!(quantities.contains(&"emse"));
    assert!(rows.iter().all(|r| r["pass"].as_bool().unwrap()), "rows: {rows:?}");
}

#[test]
fn compare_passes_on_bundled_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/atc-ring.json");
    let out_dir = dir.path().join("out");
    let out = run(bin().args(["compare", "-c"]).arg(&config).arg("-o").arg(&out_dir));
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("msd"), "stdout: {stdout}");
    assert!(stdout.contains("pass"));
    let cmp: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("comparison.json")).unwrap())
            .unwrap();
    assert_eq!(cmp["comparable"], serde_json::Value::Bool(true));
}
