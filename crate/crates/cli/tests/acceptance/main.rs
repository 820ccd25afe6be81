//! Acceptance run: each criterion prints one PASS/FAIL line, then the test
//! fails if any criterion failed.

mod breach_curves;
mod dichotomy;
mod determinism;
mod entropy;
mod extraction;
mod multinomial;
mod quantum;
mod tpcp;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

pub fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_y00lab")).args(args).output().expect("spawn y00lab");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// `field,value` rows of a CSV artifact, comments skipped.
pub fn fields(csv: &str) -> Vec<(String, String)> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .filter_map(|l| l.split_once(',').map(|(a, b)| (a.to_string(), b.to_string())))
        .collect()
}

pub fn field(csv: &str, name: &str) -> Option<String> {
    fields(csv).into_iter().find(|(k, _)| k == name).map(|(_, v)| v)
}

type Criterion = (&'static str, fn() -> Verdict);

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("1 breach curves", breach_curves::run),
        ("2 multinomial vs bound", multinomial::run),
        ("3 its dichotomy", dichotomy::run),
        ("4 quantum detection", quantum::run),
        ("5 tpcp no advantage", tpcp::run),
        ("6 entropy suite", entropy::run),
        ("7 extraction suite", extraction::run),
        ("8 determinism", determinism::run),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let start = Instant::now();
        let v = f();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {name}: {tag} ({:.1} s) {}", start.elapsed().as_secs_f64(), v.detail);
        if !v.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
