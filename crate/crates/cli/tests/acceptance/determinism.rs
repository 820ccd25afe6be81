use std::fs;
use std::path::Path;

use crate::{cli, config, Verdict};

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

pub fn run() -> Verdict {
    let jobs: [(&str, &str, &[&str]); 6] = [
        ("simulate", "identity_nonits.toml", &[]),
        ("breach-curve", "fig1.toml", &[]),
        ("fca", "identity_nonits.toml", &["--trials", "4", "--horizon", "4000"]),
        ("qdetect", "keyfresh_demo.toml", &[]),
        ("keyfresh", "keyfresh_demo.toml", &[]),
        ("report", "dsr_bitrev.toml", &[]),
    ];
    let mut compared = 0;
    let mut problems = Vec::new();
    for (sub, cfg, extra) in jobs {
        let cfg = config(cfg);
        let runs: Vec<_> = (0..2)
            .map(|_| {
                let dir = tempfile::tempdir().unwrap();
                let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--seed", "42"];
                args.extend_from_slice(extra);
                let out = dir.path().to_str().unwrap().to_string();
                args.extend(["--out", &out]);
                let r = cli(&args);
                (r.code, artifacts(dir.path()))
            })
            .collect();
        if runs[0].1.is_empty() {
            problems.push(format!("{sub}: no artifacts (exit {})", runs[0].0));
        } else if runs[0] != runs[1] {
            problems.push(format!("{sub}: artifacts differ"));
        }
        compared += runs[0].1.len();
    }
    Verdict::new(problems.is_empty(), format!("{compared} artifacts compared; problems {problems:?}"))
}
