use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apalu-lab"))
        .args(args)
        .output()
        .expect("spawn apalu-lab")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_FIT: &str = r#"{
  "task": "function_fit",
  "model": {"hidden": [8]},
  "epochs": 3,
  "seeds": [0, 1],
  "data": {"points": 64}
}"#;

#[test]
fn version_prints_package_version() {
    let out = lab(&["version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn train_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_FIT);
    let out_dir = dir.path().join("out");
    let set = format!("output_dir={}", out_dir.display());
    let out = lab(&["train", "--config", &cfg, "--set", &set]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("seed ")).count(), 2);
    assert!(out_dir.join("report_0.json").exists());
    assert!(out_dir.join("curve_1.csv").exists());
}

#[test]
fn compare_prints_one_row_per_arm() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_FIT);
    let out = lab(&["compare", "--config", &cfg, "--set", "baselines=[\"tanh\"]"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("activation,seeds"));
    assert!(lines[1].starts_with("apalu,2,"));
    assert!(lines[2].starts_with("tanh,2,"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_FIT);
    let out = lab(&["train", "--config", &cfg, "--set", "batch_size=0"]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = write_config(dir.path(), r#"{"task": "function_fit", "bogus": 1}"#);
    assert_eq!(lab(&["train", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(lab(&["verify", "--suite", "nope"]).status.code(), Some(2));
}

#[test]
fn missing_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.csv");
    let body = format!(
        r#"{{"task": "csv_regression", "epochs": 1, "seeds": [0], "data": {{"csv_path": "{}"}}}}"#,
        missing.display()
    );
    let cfg = write_config(dir.path(), &body);
    assert_eq!(lab(&["train", "--config", &cfg]).status.code(), Some(3));
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_FIT);
    let out = lab(&["train", "--config", &cfg, "--set", "optimizer.lr=1e300"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_gradients_passes() {
    let out = lab(&["verify", "--suite", "gradients"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS"));
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        apalu::runner::ExperimentConfig::from_json(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
