use std::time::Instant;

use crate::{cli, config, field, Verdict};

struct Arm {
    recovered: usize,
    trials: usize,
    class: String,
    crossover: f64,
}

fn arm(name: &str, seed: &str) -> Result<Arm, String> {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config(name);
    let cfg = cfg.to_str().unwrap();
    let fca = cli(&["fca", "--config", cfg, "--seed", seed, "--out", out]);
    if fca.code != 0 && fca.code != 4 {
        return Err(format!("{name}: fca exit {}: {}", fca.code, fca.stderr));
    }
    let rep = cli(&["report", "--config", cfg, "--seed", seed, "--out", out]);
    if rep.code != 0 {
        return Err(format!("{name}: report exit {}: {}", rep.code, rep.stderr));
    }
    let csv = std::fs::read_to_string(dir.path().join("fca.csv")).unwrap();
    let trials: Vec<bool> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("trial"))
        .map(|l| l.split(',').nth(1) == Some("1"))
        .collect();
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    Ok(Arm {
        recovered: trials.iter().filter(|&&r| r).count(),
        trials: trials.len(),
        class: field(&report, "classification").unwrap_or_default(),
        crossover: field(&report, "best_word_bit_crossover").and_then(|v| v.parse().ok()).unwrap_or(f64::NAN),
    })
}

pub fn run() -> Verdict {
    let start = Instant::now();
    let (plain, dsr) = match (arm("identity_nonits.toml", "1"), arm("dsr_bitrev.toml", "1")) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Verdict::new(false, e),
    };
    let secs = start.elapsed().as_secs_f64();
    let plain_ok =
        plain.trials == 100 && plain.recovered >= 95 && plain.class == "NonITS" && plain.crossover <= 0.25;
    // at a 2^-14 success rate, 100 trials see no recovery with probability > 0.99
    let dsr_ok = dsr.trials == 100 && dsr.recovered == 0 && (dsr.class == "ITS" || dsr.class == "Ideal");
    Verdict::new(
        plain_ok && dsr_ok && secs < 600.0,
        format!(
            "identity: {}/{} recovered, {}, crossover {:.4}; bit-reversal+DSR: {}/{} recovered, {}, crossover {:.4}; \
             runtime {secs:.1}s",
            plain.recovered, plain.trials, plain.class, plain.crossover, dsr.recovered, dsr.trials, dsr.class,
            dsr.crossover
        ),
    )
}
