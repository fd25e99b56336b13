//! End-to-end tests of the command-line binary: config ingestion, output
//! files, exit codes, and the simulate/samplecurve flows.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pwa_barrier::scenario::required_samples;

const BIN: &str = env!("CARGO_BIN_EXE_pwa-barrier");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary launches")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

const WALK_CONFIG: &str = r#"
seed = 7
horizon = 10
M = 1.0

grid = [[-3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5]]

[system]
regions = [{ H = [[1.0], [-1.0]], h = [3.5, 3.5] }]
dynamics = [{ A = [[1.0]], b = [0.0] }]
initial = { H = [[1.0], [-1.0]], h = [0.5, 0.5] }
safe = { H = [[1.0], [-1.0]], h = [2.5, 2.5] }
unsafe = [
  { H = [[-1.0], [1.0]], h = [3.5, -2.5] },
  { H = [[1.0], [-1.0]], h = [-2.5, 3.5] },
]

[scenario]
eps = 0.1
N = 40

[noise]
sigma = [0.01]
"#;

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn synth_writes_certificate_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), WALK_CONFIG);
    let cert = dir.path().join("cert.json");
    let out = run(&["synth", "--config", config.to_str().unwrap(), "--out", cert.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    let text = stdout_of(&out);
    assert!(text.contains("resolved: N=40 eps=0.1"), "stdout: {text}");
    assert!(text.contains("result: gamma="), "stdout: {text}");
    assert!(text.contains("verification: passed=true"), "stdout: {text}");
    assert!(text.contains("certificate: "), "stdout: {text}");
    assert!(text.contains("report: "), "stdout: {text}");

    let cert_json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&cert).unwrap()).unwrap();
    assert!(cert_json["meta"]["fingerprint"].is_string());
    assert!(cert_json["barrier"]["pieces"].is_array() || cert_json["barrier"].is_object());
    assert!(cert_json["result"]["safety_lower_bound"].as_f64().is_some());

    let report = dir.path().join("cert.report.json");
    let report_json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report_json["resolved"]["N"], 40);
    assert_eq!(report_json["verification"]["passed"], true);
    assert!(report_json["timings"]["solve_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn identical_runs_emit_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), WALK_CONFIG);
    let mut bytes = Vec::new();
    for name in ["a.json", "b.json"] {
        let cert = dir.path().join(name);
        let out = run(&[
            "synth",
            "--config",
            config.to_str().unwrap(),
            "--out",
            cert.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
        bytes.push(fs::read(&cert).unwrap());
    }
    assert_eq!(bytes[0], bytes[1], "same config + seed must be byte-identical");
}

#[test]
fn overconstrained_scenario_block_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let body = WALK_CONFIG.replace(
        "[scenario]\neps = 0.1\nN = 40",
        "[scenario]\neps = 0.1\nN = 40\nbeta_target = 1e-6",
    );
    let config = write_config(dir.path(), &body);
    let out = run(&["synth", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    let err = stderr_of(&out);
    assert!(err.contains("eps"), "stderr should name the conflicting fields: {err}");
    assert!(err.contains("beta_target") || err.contains("N"), "stderr: {err}");
}

#[test]
fn missing_config_file_exits_1() {
    let out = run(&["synth", "--config", "/nonexistent/nope.toml"]);
    assert_eq!(exit_code(&out), 1);
    assert!(!stderr_of(&out).is_empty());
}

#[test]
fn noise_csv_with_comments_is_ingested() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("noise.csv");
    let mut body = String::from("# one draw per line\n");
    for k in 0..40 {
        body.push_str(&format!("{}\n", 0.01 * ((k % 7) as f64 - 3.0)));
    }
    fs::write(&samples, body).unwrap();
    let config = write_config(dir.path(), WALK_CONFIG);
    let cert = dir.path().join("cert.json");
    let out = run(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--samples",
        samples.to_str().unwrap(),
        "--out",
        cert.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("resolved: N=40"), "stdout: {}", stdout_of(&out));
}

#[test]
fn short_noise_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("noise.csv");
    fs::write(&samples, "0.01\n-0.01\n").unwrap();
    let config = write_config(dir.path(), WALK_CONFIG);
    let out = run(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--samples",
        samples.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_of(&out).contains("2"), "stderr should mention the line count");
}

#[test]
fn dump_lp_writes_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), WALK_CONFIG);
    let lp = dir.path().join("model.lp");
    let cert = dir.path().join("cert.json");
    let out = run(&[
        "synth",
        "--config",
        config.to_str().unwrap(),
        "--dump-lp",
        lp.to_str().unwrap(),
        "--out",
        cert.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let text = fs::read_to_string(&lp).unwrap();
    assert!(text.to_lowercase().contains("minimize"), "LP text: {}", &text[..text.len().min(200)]);
    assert!(stdout_of(&out).contains("lp dump: "));
}

#[test]
fn simulate_flow_passes_on_matching_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), WALK_CONFIG);
    let cert = dir.path().join("cert.json");
    let out = run(&["synth", "--config", config.to_str().unwrap(), "--out", cert.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));

    let summary = dir.path().join("sim.json");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--cert",
        cert.to_str().unwrap(),
        "--trials",
        "2000",
        "--grid",
        "7",
        "--out",
        summary.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("soundness: passed=true"), "stdout: {text}");
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(json["soundness"]["passed"], true);
    assert!(json["soundness"]["empirical_unsafe_worst_start"].as_f64().unwrap() >= 0.0);
}

#[test]
fn simulate_rejects_foreign_certificate_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), WALK_CONFIG);
    let cert = dir.path().join("cert.json");
    let out = run(&["synth", "--config", config.to_str().unwrap(), "--out", cert.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0);

    // A different seed draws a different dataset: the stored fingerprint no
    // longer matches the resolved inputs.
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--cert",
        cert.to_str().unwrap(),
        "--trials",
        "100",
        "--seed",
        "8",
    ]);
    assert_eq!(exit_code(&out), 3, "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("fingerprint"), "stderr: {}", stderr_of(&out));
}

#[test]
fn samplecurve_emits_csv_matching_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curve.csv");
    let out = run(&[
        "samplecurve",
        "--eps",
        "0.1",
        "--d",
        "16",
        "--betas",
        "1e-3,1e-6,1e-9",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("beta,N_scenario,N_saa_reference"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    for (row, beta) in rows.iter().zip([1e-3, 1e-6, 1e-9]) {
        let cols: Vec<&str> = row.split(',').collect();
        let n: u64 = cols[1].parse().unwrap();
        assert_eq!(n, required_samples(0.1, 16, beta).unwrap(), "row: {row}");
    }
}

#[test]
fn benchmark_prints_summary_row() {
    let out = run(&["benchmark", "martingale", "--eps", "0.1", "--n-samples", "60"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("row: benchmark=martingale l_bar=7"), "stdout: {text}");
}

#[test]
fn unknown_benchmark_exits_1() {
    let out = run(&["benchmark", "quadrotor"]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_of(&out).contains("quadrotor"));
}

#[test]
fn bad_vehicle_piece_count_exits_1() {
    let out = run(&["benchmark", "vehicle", "--pieces", "19"]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_of(&out).contains("19"));
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(exit_code(&run(&["--help"])), 0);
    assert_eq!(exit_code(&run(&["synth", "--help"])), 0);
    assert_eq!(exit_code(&run(&["--version"])), 0);
}

#[test]
fn json_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    let json = serde_json::json!({
        "seed": 7,
        "horizon": 10,
        "M": 1.0,
        "grid": [[-3.5, -2.5, -1.5, -0.5, 0.5, 1.5, 2.5, 3.5]],
        "system": {
            "regions": [{ "H": [[1.0], [-1.0]], "h": [3.5, 3.5] }],
            "dynamics": [{ "A": [[1.0]], "b": [0.0] }],
            "initial": { "H": [[1.0], [-1.0]], "h": [0.5, 0.5] },
            "safe": { "H": [[1.0], [-1.0]], "h": [2.5, 2.5] },
            "unsafe": [
                { "H": [[-1.0], [1.0]], "h": [3.5, -2.5] },
                { "H": [[1.0], [-1.0]], "h": [-2.5, 3.5] }
            ]
        },
        "scenario": { "eps": 0.1, "N": 40 },
        "noise": { "sigma": [0.01] }
    });
    fs::write(&path, serde_json::to_string_pretty(&json).unwrap()).unwrap();
    let cert = dir.path().join("cert.json");
    let out = run(&["synth", "--config", path.to_str().unwrap(), "--out", cert.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).contains("verification: passed=true"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &format!("{WALK_CONFIG}\nextra_key = 1\n"));
    let out = run(&["synth", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_of(&out).contains("extra_key"), "stderr: {}", stderr_of(&out));
}
