use std::path::Path;
use std::process::Command;

fn dcsma(args: &[&str], cwd: &Path) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dcsma"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

const PAIR: &str = r#"
horizon = 60000
seed = 5
warmup_fraction = 0.1
measured_links = [0]

[graph]
kind = "pair"

[scheduler]
variant = "delayed"
T = 2

[record]
timeseries_block = 1000
"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pair.toml"), PAIR).unwrap();
    std::fs::write(dir.path().join("path3.toml"), "n_links = 3\nedges = [[0, 1], [1, 2]]\n").unwrap();
    dir
}

#[test]
fn simulate_writes_outputs() {
    let dir = setup();
    let (code, stdout, stderr) = dcsma(&["simulate", "--config", "pair.toml", "--seed", "9", "--out", "run"], dir.path());
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("activity"));
    for f in ["config.toml", "result.json", "manifest.json", "correlation.csv", "timeseries.csv"] {
        assert!(dir.path().join("run").join(f).exists(), "{f}");
    }
    let cfg = std::fs::read_to_string(dir.path().join("run/config.toml")).unwrap();
    assert!(cfg.contains("seed = 9"));
}

#[test]
fn validate_exit_codes() {
    let dir = setup();
    let (code, stdout, _) = dcsma(&["validate", "--config", "pair.toml", "--no-sweep"], dir.path());
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("checks passed"));

    // A zero-width band fails every statistical check.
    let (code, stdout, _) = dcsma(&["validate", "--config", "pair.toml", "--no-sweep", "--z", "0"], dir.path());
    assert_eq!(code, 1, "{stdout}");
    assert!(stdout.contains("FAIL marginals"));

    let (code, _, stderr) = dcsma(
        &["validate", "--config", "pair.toml", "--override", "scheduler.access_prob=0"],
        dir.path(),
    );
    assert_eq!(code, 2);
    assert!(stderr.contains("reducible"));
}

#[test]
fn config_errors_exit_two() {
    let dir = setup();
    let (code, _, stderr) = dcsma(&["simulate", "--config", "pair.toml", "--override", "scheduler.T=0"], dir.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("scheduler.T"));
    let (code, _, stderr) = dcsma(&["simulate", "--config", "missing.toml"], dir.path());
    assert_eq!(code, 2, "{stderr}");
    let (code, _, stderr) = dcsma(&["experiment", "fig-unknown"], dir.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("fig-delay"));
    let (code, _, stderr) = dcsma(&["experiment", "fig-delay", "--override", "kernel=\"fancy\""], dir.path());
    assert_eq!(code, 2);
    assert!(stderr.contains("kernel"));
}

#[test]
fn experiment_listing_and_run() {
    let dir = setup();
    let (code, stdout, _) = dcsma(&["experiment"], dir.path());
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 6);
    let (code, stdout, _) = dcsma(&["experiment", "fig-offdur", "--show-defaults"], dir.path());
    assert_eq!(code, 0);
    assert!(stdout.contains("orders"));
    let (code, _, stderr) = dcsma(
        &[
            "experiment",
            "fig-offdur",
            "--override",
            "graph={kind=\"cycle\", n_links=5}",
            "--override",
            "horizon=20000",
            "--override",
            "orders=[1, 4]",
            "--out",
            "exp",
        ],
        dir.path(),
    );
    assert_eq!(code, 0, "{stderr}");
    let csv = std::fs::read_to_string(dir.path().join("exp/fig-offdur/offdur.csv")).unwrap();
    assert!(csv.starts_with("T,mean,cov\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn oracle_prints_report() {
    let dir = setup();
    let (code, stdout, stderr) = dcsma(
        &["oracle", "--graph", "path3.toml", "--lambda", "1", "--access", "0.25", "--max-lag", "4"],
        dir.path(),
    );
    assert_eq!(code, 0, "{stderr}");
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["n_links"], 3);
    assert_eq!(v["pi"].as_array().unwrap().len(), 5);
    let (code, _, _) = dcsma(&["oracle", "--graph", "path3.toml", "--lambda", "1,2"], dir.path());
    assert_eq!(code, 2);
}
