use std::path::{Path, PathBuf};
use std::process::Command;

use bregman_control::cli::{cmd_synthesize, CliError, Invocation, RunConfig};

fn bregctl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_bregctl")).args(args).env_remove("BREGCTL_OUT_DIR").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &str, cfg: &Path, out: &Path) -> (i32, String, String) {
    let o = bregctl(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stdout).into(), String::from_utf8_lossy(&o.stderr).into())
}

const ELASTIC: &str = r#"{
  "system": {"A": [[1.2]], "B": [[1.0]]},
  "cost": {"mode": "family", "family": {"name": "elasticnet", "eps": 0.01}},
  "synthesis": {"objective": "max-m-scalar"}
}"#;

#[test]
fn synthesize_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "en.json", ELASTIC);
    let out = dir.path().join("out");
    let (code, stdout, _) = run("synthesize", &cfg, &out);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("riccati max residual"));
    let cert = out.join("certificate.json");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    let m = json["M"][0][0].as_f64().unwrap();
    assert!((m - 0.051428571).abs() < 1e-5, "{m}");

    let verify = format!(
        r#"{{"system": {{"A": [[1.2]], "B": [[1.0]], "noise": {{"family": "gaussian", "covariance": [[1.0]]}}}},
            "cost": {{"mode": "family", "family": {{"name": "elasticnet", "eps": 0.01}}}},
            "synthesis": {{"certificate": {:?}}}}}"#,
        cert.to_str().unwrap()
    );
    let vcfg = write(dir.path(), "verify.json", &verify);
    let (code, stdout, stderr) = run("verify", &vcfg, &out);
    assert_eq!(code, 0, "{stdout}{stderr}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 6);
}

#[test]
fn non_square_a_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", &ELASTIC.replace("[[1.2]]", "[[1.2, 0.0]]"));
    let (code, _, stderr) = run("synthesize", &cfg, &dir.path().join("o"));
    assert_eq!(code, 1);
    assert!(stderr.contains("dimension"), "{stderr}");
}

#[test]
fn unstable_bang_bang_on_curvature_route_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bb.toml",
        r#"
[system]
A = [[1.5]]
B = [[0.1]]

[cost]
mode = "family"
family = { name = "bangbang", t = 4.0 }

[synthesis]
route = "curvature"
"#,
    );
    let (code, _, stderr) = run("synthesize", &cfg, &dir.path().join("o"));
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("insufficient hypotheses"), "{stderr}");
}

#[test]
fn simulate_requires_certificate_and_positive_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let base = r#"{"system": {"A": [[1.2]], "B": [[1.0]]},
        "cost": {"mode": "family", "family": {"name": "elasticnet", "eps": 0.01}},
        SYN
        "simulation": {"x0": [1.0], "horizon": H, "seeds": [0]}}"#;
    let missing = write(dir.path(), "a.json", &base.replace("SYN", "").replace("H", "5"));
    assert_eq!(run("simulate", &missing, &dir.path().join("o")).0, 1);
    let zero = write(dir.path(), "b.json", &base.replace("SYN", r#""synthesis": {"M": [[0.01]]},"#).replace("H", "0"));
    let (code, _, stderr) = run("simulate", &zero, &dir.path().join("o"));
    assert_eq!(code, 1);
    assert!(stderr.contains("horizon"), "{stderr}");
    let good = write(dir.path(), "c.json", &base.replace("SYN", r#""synthesis": {"M": [[0.01]]},"#).replace("H", "5"));
    let out = dir.path().join("o");
    assert_eq!(run("simulate", &good, &out).0, 0);
    let csv = std::fs::read_to_string(out.join("seed_0.csv")).unwrap();
    let row1: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(row1[0], "1");
    assert_eq!(row1[1].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn empty_property_selection_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "v.json",
        r#"{"system": {"A": [[1.2]], "B": [[1.0]]},
            "cost": {"mode": "family", "family": {"name": "elasticnet", "eps": 0.01}},
            "synthesis": {"M": [[0.01]]},
            "verification": {"properties": []}}"#,
    );
    assert_eq!(run("verify", &cfg, &dir.path().join("o")).0, 1);
}

#[test]
fn perturbed_certificate_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "en.json", ELASTIC);
    let out = dir.path().join("out");
    assert_eq!(run("synthesize", &cfg, &out).0, 0);
    let path = out.join("certificate.json");
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let m = json["M"][0][0].as_f64().unwrap();
    json["M"][0][0] = (1.5 * m).into();
    let bad = dir.path().join("perturbed.json");
    std::fs::write(&bad, serde_json::to_string(&json).unwrap()).unwrap();
    let vcfg = write(
        dir.path(),
        "v.json",
        &format!(
            r#"{{"system": {{"A": [[1.2]], "B": [[1.0]]}},
                "cost": {{"mode": "family", "family": {{"name": "elasticnet", "eps": 0.01}}}},
                "synthesis": {{"certificate": {:?}}}, "verification": {{"properties": ["riccati"]}}}}"#,
            bad.to_str().unwrap()
        ),
    );
    let (code, stdout, _) = run("verify", &vcfg, &out);
    assert_eq!(code, 3);
    assert!(stdout.contains("FAIL riccati"), "{stdout}");
}

#[test]
fn compare_reports_baseline_and_seed_offset_shifts_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"system": {"A": [[1.2]], "B": [[1.0]], "noise": {"family": "gaussian", "covariance": [[1.0]]}},
            "cost": {"mode": "family", "family": {"name": "elasticnet", "eps": 0.01}},
            "synthesis": {"M": [[0.01]]},
            "simulation": {"x0": [0.0], "horizon": 50, "seeds": [1, 2]}}"#,
    );
    let out = dir.path().join("o");
    let o = bregctl(&["compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed-offset", "10"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("lqr average cost"));
    assert!(out.join("seed_11_lqr.csv").exists() && out.join("seed_12.csv").exists());
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seeds"], serde_json::json!([11, 12]));
    assert!(out.join("compare.json").exists());
}

#[test]
fn environment_sets_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "en.json", ELASTIC);
    let env_out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_bregctl"))
        .args(["synthesize", "--config", cfg.to_str().unwrap()])
        .env("BREGCTL_OUT_DIR", &env_out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(env_out.join("certificate.json").exists());
}

#[test]
fn library_entry_point_reports_exit_codes() {
    let cfg = RunConfig::from_json(&ELASTIC.replace("\"objective\": \"max-m-scalar\"", "\"M\": [[5.0]]")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let inv = Invocation { config: PathBuf::new(), out: Some(dir.path().to_path_buf()), seed_offset: 0 };
    let err = cmd_synthesize(&cfg, &inv, &mut Vec::new()).unwrap_err();
    assert!(matches!(err, CliError::Infeasible(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
}
