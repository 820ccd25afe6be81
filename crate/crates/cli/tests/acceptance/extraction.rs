use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use y00lab::breach::BreachParams;
use y00lab::config::parse_scenario;
use y00lab::keyfresh::{
    optimal_tau, refresh_roundtrip, sd_from_uniform, BreachBudget, HashSpec, KeyPair, RefreshParams, Source,
};
use y00lab::Error;

use crate::{config, Verdict};

fn bits(x: u64, n: usize) -> Vec<u8> {
    (0..n).map(|j| ((x >> j) & 1) as u8).collect()
}

/// L1 distance averaged over every seed, hashing bit vectors one by one.
fn brute_l1(tau: usize, src: &Source) -> f64 {
    let seed_bits = src.n + tau - 1;
    let mut total = 0.0;
    for w in 0..1u64 << seed_bits {
        let h = HashSpec::new(src.n, tau, bits(w, seed_bits)).unwrap();
        for cell in &src.cells {
            let mut hist = vec![0.0; 1 << tau];
            let pc: f64 = cell.iter().map(|c| c.1).sum();
            for &(x, p) in cell {
                let z = h.hash(&bits(x, src.n)).unwrap().iter().enumerate().fold(0, |a, (i, &b)| a | (b as usize) << i);
                hist[z] += p;
            }
            total += hist.iter().map(|q| (q - pc / (1 << tau) as f64).abs()).sum::<f64>();
        }
    }
    total / (1u64 << seed_bits) as f64
}

fn lhl(rng: &mut ChaCha8Rng, notes: &mut Vec<String>) -> bool {
    let small = Source::flat_subsets(6, 3, 3, rng).unwrap();
    let oracle = brute_l1(2, &small);
    let rep = sd_from_uniform(2, &small, true, 0).unwrap();
    let oracle_ok = (rep.l1_distance - oracle).abs() <= 1e-12;
    notes.push(format!("brute-force oracle err {:.1e}", (rep.l1_distance - oracle).abs()));

    let mut cases = vec![(Source::uniform(12).unwrap(), 4)];
    for (n, k, conds, tau) in [(8, 4, 4, 2), (10, 6, 2, 3), (12, 9, 1, 3), (16, 8, 2, 2), (20, 6, 2, 2), (20, 8, 1, 2)] {
        cases.push((Source::flat_subsets(n, k, conds, rng).unwrap(), tau));
    }
    let mut exact = 0;
    let mut worst_ratio: f64 = 0.0;
    let mut ok = oracle_ok;
    for (src, tau) in &cases {
        let r = sd_from_uniform(*tau, src, true, 0).unwrap();
        exact += r.certified as usize;
        worst_ratio = worst_ratio.max(r.l1_distance / (2.0 * r.epsilon));
        ok &= r.certified
            && r.within_bound()
            && (r.positive_part - r.negative_part).abs() <= 1e-12
            && (r.positive_part + r.negative_part - r.l1_distance).abs() <= 1e-12;
    }
    notes.push(format!("{exact}/{} exact instances, worst L1/(2ε) {worst_ratio:.3}", cases.len()));
    ok
}

fn tau_grid(notes: &mut Vec<String>) -> bool {
    let mut ok = true;
    let hs: [f64; 12] = [3.0, 4.0, 5.5, 7.0, 10.0, 12.0, 12.3, 20.0, 31.7, 64.0, 100.0, 255.9];
    for &h in &hs {
        let best = (1..=h.floor() as usize)
            .min_by(|&a, &b| {
                let g = |t: usize| 2.0 * ((t as f64 - h) / 2.0).exp2() + (-(t as f64)).exp2();
                g(a).total_cmp(&g(b))
            })
            .unwrap();
        let lib = optimal_tau(h).unwrap();
        let (lo, hi) = ((h / 3.0).floor() as usize, (h / 3.0).ceil() as usize);
        ok &= (best == lo || best == hi) && lib.grid_argmin == Some(best) && lib.tau == lo;
    }
    notes.push(format!("τ grid argmin in {{⌊h/3⌋, ⌈h/3⌉}} for {} values: {ok}", hs.len()));
    ok
}

fn guessing(rng: &mut ChaCha8Rng, notes: &mut Vec<String>) -> bool {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for (k, conds) in [(3, 1), (6, 1), (6, 4), (9, 2), (12, 1)] {
        let tau = k / 3;
        let src = if k == 12 { Source::uniform(12).unwrap() } else { Source::flat_subsets(12, k, conds, rng).unwrap() };
        let r = sd_from_uniform(tau, &src, true, 0).unwrap();
        let limit = 3.0 * (-(tau as f64)).exp2();
        worst = worst.max(r.guess_probability / limit);
        ok &= r.certified && r.guess_probability <= limit + 1e-12 && r.guess_probability <= r.guess_bound + 1e-12;
    }
    notes.push(format!("n=12 guessing worst ratio to 3·2^-τ {worst:.3}"));
    ok
}

fn refresh(rng: &mut ChaCha8Rng, notes: &mut Vec<String>) -> bool {
    let text = std::fs::read_to_string(config("keyfresh_demo.toml")).unwrap();
    let sc = parse_scenario(&text).unwrap();
    let cfg = &sc.system;
    let rep = sc.refresh.repetition;
    let mut alice = KeyPair { k: cfg.prng_s.seed_bits().to_vec(), dk: cfg.prng_dx.seed_bits().to_vec() };
    let mut bob = alice.clone();
    let spent = BreachBudget { params: BreachParams::new(-13.0, 2.0, 0.5).unwrap(), elapsed_periods: 1e9 };
    let (mut refreshed, mut failed, mut refused, mut broken, mut unexpected) = (0, 0, 0, 0, 0);
    let mut zero_key = 0;
    for run in 0..100 {
        let block = rng.random_range(0..sc.refresh.kr_bits);
        let tamper: Vec<usize> = match run % 4 {
            // majority of one repetition block: the bit decodes wrong
            1 => (0..rep / 2 + 1).map(|j| block * rep + j).collect(),
            // minority: corrected by the repetition code
            2 => (0..rep / 2).map(|j| block * rep + j).collect(),
            _ => vec![],
        };
        let params = RefreshParams {
            kr_bits: sc.refresh.kr_bits,
            repetition: rep,
            bob_crossover: 0.0,
            tamper,
            seed: rng.random(),
        };
        let budget = (run % 4 == 3).then_some(&spent);
        let before = (alice.clone(), bob.clone());
        match refresh_roundtrip(cfg, &mut alice, &mut bob, &params, budget) {
            Ok(t) => {
                refreshed += 1;
                broken += (alice != t.new_keys || bob != t.new_keys) as usize;
                unexpected += (run % 4 == 1 || run % 4 == 3) as usize;
            }
            Err(e) => {
                broken += (alice != before.0 || bob != before.1) as usize;
                match (e, run % 4) {
                    (Error::DecodeFailure(_), 1) => failed += 1,
                    (Error::RefreshRefused(_), 3) => refused += 1,
                    // a derived all-zero LFSR seed aborts the round
                    (Error::RefreshRefused(_), 0 | 2) => zero_key += 1,
                    (Error::DecodeFailure(_) | Error::RefreshRefused(_), _) => unexpected += 1,
                    _ => broken += 1,
                }
            }
        }
        broken += (alice != bob) as usize;
    }
    notes.push(format!(
        "refresh: {refreshed} refreshed, {failed} decode failures, {refused} budget refusals, \
         {zero_key} zero-key aborts, {broken} non-atomic, {unexpected} unexpected outcomes"
    ));
    broken == 0 && unexpected == 0
}

pub fn run() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    let mut notes = Vec::new();
    let a = lhl(&mut rng, &mut notes);
    let b = tau_grid(&mut notes);
    let c = guessing(&mut rng, &mut notes);
    let d = refresh(&mut rng, &mut notes);
    Verdict::new(a && b && c && d, notes.join("; "))
}
