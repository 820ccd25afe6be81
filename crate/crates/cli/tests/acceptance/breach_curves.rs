use std::time::Instant;

use crate::{cli, config, Verdict};

pub fn run() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let start = Instant::now();
    let r = cli(&["breach-curve", "--config", config("fig1.toml").to_str().unwrap(), "--out", out]);
    let secs = start.elapsed().as_secs_f64();
    if r.code != 0 {
        return Verdict::new(false, format!("exit {}: {}", r.code, r.stderr));
    }
    let csv = std::fs::read_to_string(dir.path().join("breach_curve.csv")).unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('N'))
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let curves = rows[0].len() - 1;

    // Pr(r) = (2^256 - 1)^-2 = 2^-512 · (1 - 2^-256)^-2
    let prior = (-512f64).exp2() * (1.0 - (-256f64).exp2()).powi(-2);
    let start_ok = (1..=curves).all(|c| ((rows[0][c] - prior) / prior).abs() <= 1e-9);

    let monotone = (1..=curves).all(|c| rows.windows(2).all(|w| w[1][c] >= w[0][c]));

    // listed top to bottom: 1/N = 1-2^-13, 1-2^-26, 1-2^-52
    let listed = rows.iter().all(|r| (1..curves).all(|c| r[c] >= r[c + 1]));
    let reversed = rows.iter().all(|r| (1..curves).all(|c| r[c] <= r[c + 1]));
    let strict_at = rows.iter().position(|r| r[1] < r[curves]).map(|i| rows[i][0]);

    let fast = secs < 1.0;
    Verdict::new(
        curves == 3 && start_ok && monotone && listed && fast,
        format!(
            "curves={curves} bound(0)=prior:{start_ok} monotone:{monotone} listed order:{listed} \
             reversed order:{reversed} (first N with curve_0 < curve_2: {strict_at:?}) runtime {secs:.3}s"
        ),
    )
}
