use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use y00lab::breach::{count_vector_total, n_breach, TinyInstance};
use y00lab::channel::{symbol_error_dist, ErrorPatternDist};
use y00lab::prng::{GeneratorSpec, LfsrSpec};
use y00lab::y00::Y00Config;

use crate::Verdict;

const INSTANCES: usize = 24;
const COUNT_CAP: u64 = 300_000;
const MC_TRIALS: u64 = 1_000_000;

pub fn run() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let lfsr = GeneratorSpec::Lfsr(LfsrSpec::new(4, &[4, 1], &[1, 0, 0, 0]).unwrap());
    let mut checked = 0;
    let mut bound_violations = 0;
    let mut per_key_violations = 0;
    let mut mc_misses = Vec::new();
    let mut worst_z: f64 = 0.0;
    for inst in 0..INSTANCES {
        let m = if rng.random::<bool>() { 2 } else { 4 };
        let bits = (2 * m as u32).trailing_zeros();
        let t = rng.random_range(1..=(12 / bits).min(3)) as usize;
        let keys = rng.random_range(2..=6);
        let laws: Vec<Vec<f64>> = (0..t)
            .map(|_| {
                let cfg = Y00Config::psk(m, rng.random_range(0.3..2.0), 1.0, lfsr.clone(), lfsr.clone());
                symbol_error_dist(0, &cfg).unwrap()
            })
            .collect();
        let dist = ErrorPatternDist::from_slots(m, laws).unwrap();
        let refs: Vec<Vec<usize>> =
            (0..keys).map(|_| (0..t).map(|_| rng.random_range(0..2 * m)).collect()).collect();
        let tiny = TinyInstance::new(dist.clone(), refs).unwrap();
        let inv = n_breach(&dist).inv_n_breach;
        let prior = 1.0 / keys as f64;
        let mut last = None;
        for n in 1..=8u32 {
            if count_vector_total(1 << dist.pattern_len(), n).is_none_or(|c| c > COUNT_CAP) {
                break;
            }
            let per: Vec<f64> = (0..keys).map(|j| tiny.exact_success(j, n).unwrap()).collect();
            let avg = per.iter().sum::<f64>() / keys as f64;
            let bound = 1.0 - (1.0 - prior) * (-(n as f64) * inv).exp2();
            checked += 1;
            if avg > bound + 1e-12 {
                bound_violations += 1;
            }
            if per.iter().any(|&p| p > bound + 1e-12) {
                per_key_violations += 1;
            }
            last = Some((n, per[0]));
        }
        if let Some((n, exact)) = last {
            let freq = tiny.monte_carlo_success(0, n, MC_TRIALS, 77 + inst as u64);
            let sigma = (exact * (1.0 - exact) / MC_TRIALS as f64).sqrt();
            let dev = (freq - exact).abs();
            if sigma > 0.0 {
                worst_z = worst_z.max(dev / sigma);
            }
            if dev > 3.0 * sigma + 1e-12 {
                mc_misses.push(inst);
            }
        }
    }
    Verdict::new(
        bound_violations == 0 && per_key_violations == 0 && mc_misses.is_empty() && checked >= 20,
        format!(
            "{INSTANCES} instances, {checked} (instance, N) cases; key-averaged violations {bound_violations}; \
             per-key violations {per_key_violations}; Monte Carlo misses {mc_misses:?} (worst {worst_z:.2}σ)"
        ),
    )
}
