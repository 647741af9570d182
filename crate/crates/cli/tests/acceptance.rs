//! Acceptance criterion 11: `compare` output is byte-identical across reruns and
//! thread counts.

use std::path::{Path, PathBuf};
use std::process::Command;

fn config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example4.toml")
}

fn compare(out: &Path, threads: &str) -> bool {
    Command::new(env!("CARGO_BIN_EXE_riskfilt"))
        .args([
            "compare",
            "--seed",
            "424242",
            "--n",
            "10000",
            "--threads",
            threads,
            "--config",
        ])
        .arg(config())
        .arg("--out")
        .arg(out)
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let runs = [("a", "1"), ("b", "1"), ("c", "8")];
    let mut ok = true;
    for (name, threads) in runs {
        ok &= compare(&dir.path().join(name), threads);
    }
    let mut differing = Vec::new();
    if ok {
        for file in ["compare.csv", "paired.csv", "compare.json"] {
            let base = std::fs::read(dir.path().join("a").join(file)).unwrap();
            for (name, _) in &runs[1..] {
                if std::fs::read(dir.path().join(name).join(file)).unwrap() != base {
                    differing.push(format!("{name}/{file}"));
                }
            }
        }
    }
    let pass = ok && differing.is_empty();
    println!(
        "{} AC11 determinism: compare run twice on 1 thread and once on 8 threads, {}",
        if pass { "PASS" } else { "FAIL" },
        if !ok {
            "a run failed".to_owned()
        } else if differing.is_empty() {
            "compare.csv, paired.csv and compare.json byte-identical".to_owned()
        } else {
            format!("differing outputs: {}", differing.join(", "))
        }
    );
    if !pass {
        std::process::exit(1);
    }
}
