//! End-to-end tests of the `nlsh` binary: argument handling, exit codes,
//! artifact schemas, and manifest-driven reproduction.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nlsh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlsh"))
        .args(args)
        .env_remove("NLS_HIERARCHY_CACHE_DIR")
        .output()
        .expect("spawning nlsh")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    let bytes = std::fs::read(path).unwrap_or_else(|e| panic!("reading {path:?}: {e}"));
    serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("parsing {path:?}: {e}"))
}

#[test]
fn generate_j1_prints_the_cubic_equation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let output = nlsh(&["generate", "--j", "1", "--out-dir", out]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    assert_eq!(stdout_of(&output).trim(), "i q_t = - q_xx + 2 q^2 r");

    let table = read_json(&dir.path().join("equation_j1.json"));
    assert_eq!(table["j"], 1);
    assert_eq!(table["entries"].as_array().unwrap().len(), 1);
    assert_eq!(table["entries"][0]["alpha"], serde_json::json!([0, 0, 0]));

    let manifest = read_json(&dir.path().join("manifest_generate.json"));
    assert_eq!(manifest["command"], "generate");
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 2);
    for entry in outputs {
        let digest = entry["sha256"].as_str().unwrap();
        assert_eq!(digest.len(), 64, "digests are hex sha-256");
        assert!(dir.path().join(entry["path"].as_str().unwrap()).exists());
    }
}

#[test]
fn generate_flow_keeps_or_folds_the_weight() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let symbolic = nlsh(&["generate", "--flow", "4", "--out-dir", out]);
    assert!(symbolic.status.success());
    let text = stdout_of(&symbolic);
    assert!(
        text.contains("(-1/8) * alpha_4 *"),
        "symbolic weight missing from: {text}"
    );

    let canonical = nlsh(&["generate", "--flow", "2", "--alpha", "canonical", "--out-dir", out]);
    assert!(canonical.status.success());
    assert_eq!(
        stdout_of(&canonical).trim(),
        "q_t = (-i) * (- q_xx + 2 q^2 r)"
    );

    // Canonical weights only exist for the even flows.
    let odd = nlsh(&["generate", "--flow", "3", "--alpha", "canonical", "--out-dir", out]);
    assert_eq!(odd.status.code(), Some(2), "{}", stderr_of(&odd));
}

#[test]
fn verify_appendix_passes_and_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let output = nlsh(&["verify", "appendix", "--out-dir", out]);
    assert!(output.status.success(), "{}", stderr_of(&output));

    let report = read_json(&dir.path().join("verify_appendix.json"));
    assert_eq!(report["failed"], 0);
    assert_eq!(report["passed"], report["checks"].as_array().unwrap().len());
}

#[test]
fn plane_wave_is_stationary_under_the_torus_equation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let output = nlsh(&[
        "simulate",
        "--torus",
        "2",
        "--ic",
        "plane-wave",
        "--t-final",
        "0.01",
        "--out-dir",
        out,
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    let summary = read_json(&dir.path().join("summary.json"));
    let error = summary["relative_l2_error_vs_closed_form"].as_f64().unwrap();
    assert!(error <= 1e-10, "plane wave drifted: {error}");
}

#[test]
fn blown_up_integration_exits_with_the_numeric_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let output = nlsh(&[
        "simulate",
        "--j",
        "1",
        "--substitute",
        "minus-conj",
        "--ic",
        "plane-wave",
        "--amplitude",
        "1000",
        "--dt",
        "0.01",
        "--t-final",
        "0.1",
        "--out-dir",
        out,
    ]);
    assert_eq!(output.status.code(), Some(3));
    assert!(stderr_of(&output).contains("numeric abort"));
}

#[test]
fn separation_table_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let output = nlsh(&[
        "illposed",
        "torus-plane-wave",
        "--j",
        "2",
        "--n",
        "4",
        "--out-dir",
        out,
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    let csv = std::fs::read_to_string(dir.path().join("separation_j2.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "n,t_n,norm_at_0,norm_at_tn");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "4");
    // At s = 0 and unit carrier the final separation is exactly 2 + 1/n.
    assert_eq!(row[3], "2.2500000000000000e0");
}

#[test]
fn c3_symbol_lists_three_zero_resonance_constellations_per_carrier() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let output = nlsh(&["illposed", "c3-symbol", "--max-carrier", "2", "--out-dir", out]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    let csv = std::fs::read_to_string(dir.path().join("c3_symbol.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[4], "0", "resonance must vanish: {row}");
    }
}

#[test]
fn rerun_reproduces_probe_output_and_detects_drifted_digests() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let output = nlsh(&[
        "probe",
        "trilinear-L2",
        "--j",
        "1",
        "--samples",
        "2",
        "--band",
        "3",
        "--time-samples",
        "16",
        "--lambdas",
        "1,2",
        "--out-dir",
        out,
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));

    let manifest_path = dir.path().join("manifest_probe.json");
    let check = nlsh(&["rerun", "--manifest", manifest_path.to_str().unwrap(), "--check"]);
    assert!(check.status.success(), "{}", stderr_of(&check));
    assert!(stdout_of(&check).contains("byte-identically"));

    // Corrupt a recorded digest: the fresh run can no longer match it.
    let mangled = std::fs::read_to_string(&manifest_path)
        .unwrap()
        .replacen("\"sha256\":\"", "\"sha256\":\"00000000", 1);
    let mangled_path = dir.path().join("manifest_mangled.json");
    std::fs::write(&mangled_path, mangled).unwrap();
    let diff = nlsh(&["rerun", "--manifest", mangled_path.to_str().unwrap(), "--check"]);
    assert_eq!(diff.status.code(), Some(1), "{}", stderr_of(&diff));
    assert!(stderr_of(&diff).contains("verification mismatch"));
}

#[test]
fn rerun_refuses_when_a_recorded_input_changed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let generated = nlsh(&["generate", "--j", "1", "--out-dir", out]);
    assert!(generated.status.success());
    let table_path = dir.path().join("equation_j1.json");

    let simulated = nlsh(&[
        "simulate",
        "--table",
        table_path.to_str().unwrap(),
        "--ic",
        "plane-wave",
        "--t-final",
        "0.002",
        "--dt",
        "0.001",
        "--out-dir",
        out,
    ]);
    assert!(simulated.status.success(), "{}", stderr_of(&simulated));

    let table = std::fs::read_to_string(&table_path).unwrap();
    std::fs::write(&table_path, table.replace("[2,1]", "[5,1]")).unwrap();
    let rerun = nlsh(&[
        "rerun",
        "--manifest",
        dir.path().join("manifest_simulate.json").to_str().unwrap(),
        "--check",
    ]);
    assert_eq!(rerun.status.code(), Some(1));
    assert!(stderr_of(&rerun).contains("changed since the recorded run"));
}

#[test]
fn config_file_fills_in_probe_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let config_path = dir.path().join("defaults.toml");
    std::fs::write(
        &config_path,
        "[probe]\nsamples = 2\nband = 3\ntime_samples = 16\nlambdas = [1, 2]\n",
    )
    .unwrap();
    let output = nlsh(&[
        "probe",
        "bilinear-L2",
        "--j",
        "1",
        "--config",
        config_path.to_str().unwrap(),
        "--out-dir",
        out,
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));

    // The manifest records the resolved values, so a rerun needs no config.
    let manifest = read_json(&dir.path().join("manifest_probe.json"));
    let argv: Vec<&str> = manifest["argv"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    let value_after = |flag: &str| argv[argv.iter().position(|a| *a == flag).unwrap() + 1];
    assert_eq!(value_after("--samples"), "2");
    assert_eq!(value_after("--band"), "3");
    assert_eq!(value_after("--lambdas"), "1,2");
}

#[test]
fn bad_usage_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let missing_target = nlsh(&["generate", "--out-dir", out]);
    assert_eq!(missing_target.status.code(), Some(2));

    let conflicting = nlsh(&["generate", "--j", "1", "--flow", "3", "--out-dir", out]);
    assert_eq!(conflicting.status.code(), Some(2));

    let unknown_estimate = nlsh(&["probe", "bogus", "--j", "1", "--out-dir", out]);
    assert_eq!(unknown_estimate.status.code(), Some(2));

    let config_path = Path::new(out).join("bad.toml");
    std::fs::write(&config_path, "[probee]\nsamples = 1\n").unwrap();
    let bad_config = nlsh(&[
        "verify",
        "appendix",
        "--config",
        config_path.to_str().unwrap(),
        "--out-dir",
        out,
    ]);
    assert_eq!(bad_config.status.code(), Some(2));
    assert!(stderr_of(&bad_config).contains("invalid config"));
}

#[test]
fn float_artifacts_round_trip_through_their_text_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let output = nlsh(&[
        "simulate",
        "--torus",
        "1",
        "--ic",
        "plane-wave",
        "--amplitude",
        "0.7",
        "--t-final",
        "0.003",
        "--dt",
        "0.001",
        "--out-dir",
        out,
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    let csv = std::fs::read_to_string(dir.path().join("snapshots.csv")).unwrap();
    for cell in csv.lines().skip(1).flat_map(|l| l.split(',').skip(1)) {
        let value: f64 = cell.parse().unwrap();
        assert_eq!(
            format!("{value:.16e}"),
            cell,
            "17-significant-digit formatting must round-trip"
        );
    }
}
