use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn riskfilt(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskfilt"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env_remove("RISKFILT_THREADS")
        .output()
        .unwrap()
}

fn last_row(path: &Path) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .last()
        .unwrap()
        .split(',')
        .map(|f| f.parse().unwrap())
        .collect()
}

fn error_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

fn write_model(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("model.toml");
    fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = "
[model]
a = 0.0
A = 1.0
mu = -1.0
T = 1.0
[lambda]
l11 = 2.0
l12 = -1.0
l22 = 1.0
[grid]
N = 40
";

#[test]
fn riccati_writes_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let out = riskfilt(&["riccati", "--T", "1"], &config("example4.toml"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let row = last_row(&dir.path().join("gammaXX.csv"));
    assert_eq!(row[0], 1.0);
    assert!((row[1] - 0.542303).abs() < 1e-6);
    let row = fs::read_to_string(dir.path().join("Gamma.csv")).unwrap();
    let first: Vec<f64> = row
        .lines()
        .nth(2)
        .unwrap()
        .split(',')
        .map(|f| f.parse().unwrap())
        .collect();
    assert!((first[1] - 0.761594).abs() < 1e-6);
}

#[test]
fn example4_shows_discrepancy() {
    let dir = tempfile::tempdir().unwrap();
    let out = riskfilt(&["example4"], &config("example4.toml"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("discrepancy.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "T,t,s,Hbar,Hhat_numeric,Hhat_printed");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    let find = |horizon: f64, t: f64, s: f64| {
        rows.iter()
            .find(|r| r[0] == horizon && (r[1] - t).abs() < 1e-12 && (r[2] - s).abs() < 1e-12)
            .unwrap()
            .clone()
    };
    let (a, b) = (find(1.0, 0.5, 0.25), find(2.0, 0.5, 0.25));
    assert!((a[3] - b[3]).abs() > 0.01);
    assert_eq!(a[4], b[4]);
    let summary = fs::read_to_string(dir.path().join("discrepancy.txt")).unwrap();
    assert!(summary.contains("bit-identical on t <= 1: yes"));
    assert!(summary.contains("|deviation| = 0.49"));
    let oracles = fs::read_to_string(dir.path().join("oracles.csv")).unwrap();
    for line in oracles.lines().skip(2) {
        let dev: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(dev < 1e-8, "{line}");
    }
}

#[test]
fn missing_lambda_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), &SMALL.replace("[lambda]", "[unused]"));
    let out = riskfilt(&["riccati"], &model, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(1));
    let err = error_json(&out);
    assert_eq!(err["category"], "validation");
    assert_eq!(err["key"], "lambda");
}

#[test]
fn blowup_is_condition_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), &SMALL.replace("mu = -1.0", "mu = 10.0"));
    let out = riskfilt(&["riccati"], &model, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["category"], "condition");
    let conditions: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/conditions.json")).unwrap()).unwrap();
    assert_eq!(conditions["conditions"][1]["satisfied"], false);
}

#[test]
fn bad_arguments_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), SMALL);
    assert_eq!(
        riskfilt(&["riccati", "--bogus"], &model, dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(
        riskfilt(&["compare", "--n", "0"], &model, dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(
        riskfilt(&["kernels", "--T", "0.123"], &model, dir.path()).status.code(),
        Some(1)
    );
    let out = Command::new(env!("CARGO_BIN_EXE_riskfilt"))
        .args(["riccati", "--config"])
        .arg(&model)
        .arg("--out")
        .arg(dir.path())
        .env("RISKFILT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn every_output_carries_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), SMALL);
    let out = dir.path().join("out");
    for args in [
        &["riccati"][..],
        &["kernels", "--stride", "4"],
        &["simulate", "--n", "3", "--seed", "5"],
        &["compare", "--n", "50", "--seed", "5"],
        &["verify-cm", "--n", "50", "--seed", "5"],
    ] {
        let o = riskfilt(args, &model, &out);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let mut hashes = std::collections::BTreeSet::new();
    for entry in fs::read_dir(&out).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let hash = if path.extension().unwrap() == "json" {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            v["config_hash"].as_str().unwrap().to_owned()
        } else {
            text.lines()
                .next()
                .unwrap()
                .strip_prefix("# config_hash=")
                .unwrap()
                .to_owned()
        };
        assert_eq!(hash.len(), 64, "{}", path.display());
        hashes.insert(hash);
    }
    // One hash per subcommand run.
    assert_eq!(hashes.len(), 5);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), SMALL);
    let args = ["verify-cm", "--n", "200", "--seed", "9"];
    riskfilt(&args, &model, &dir.path().join("a"));
    riskfilt(&args, &model, &dir.path().join("b"));
    let a = fs::read(dir.path().join("a/verify_cm.json")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/verify_cm.json")).unwrap());
    let other = ["verify-cm", "--n", "200", "--seed", "10"];
    riskfilt(&other, &model, &dir.path().join("c"));
    assert_ne!(a, fs::read(dir.path().join("c/verify_cm.json")).unwrap());
}

#[test]
fn volterra_from_covariance_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("t,s,value\n");
    for i in 0..=40 {
        for j in 0..=i {
            csv += &format!("{},{},{}\n", i as f64 / 40.0, j as f64 / 40.0, j as f64 / 40.0);
        }
    }
    fs::write(dir.path().join("k.csv"), csv).unwrap();
    let model = write_model(
        dir.path(),
        &format!("{SMALL}\n[experiment]\nkernel = \"k.csv\"\nseed = 3\n"),
    );
    let out = riskfilt(&["volterra"], &model, &dir.path().join("out"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // Brownian covariance: the diagonal is the risk-modified error variance.
    let row = last_row(&dir.path().join("out/volterra_diag.csv"));
    assert!((row[1] - 0.542303).abs() < 1e-3);
    fs::write(dir.path().join("k.csv"), "t,s,value\n0,0,0\n").unwrap();
    assert_eq!(
        riskfilt(&["volterra"], &model, &dir.path().join("out")).status.code(),
        Some(1)
    );
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), SMALL);
    riskfilt(
        &["simulate", "--n", "4", "--seed", "1", "--threads", "1"],
        &model,
        &dir.path().join("a"),
    );
    riskfilt(
        &["simulate", "--n", "4", "--seed", "1", "--threads", "4"],
        &model,
        &dir.path().join("b"),
    );
    let a = fs::read_to_string(dir.path().join("a/paths.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b/paths.csv")).unwrap());
    assert_eq!(a.lines().count(), 2 + 4 * 41);
}
