//! Key refreshment by leftover hashing: Toeplitz extraction, the optimal
//! sacrifice `τ = H∞/3`, exact statistical distance checks on small sources
//! and the keyed refresh round over the Y00 channel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::breach::{time_to_threshold, BreachParams};
use crate::channel::{bob_receive, decide_all, eve_regions, symbol_error_dist, tap_and_measure};
use crate::error::{invalid, Error, Result};
use crate::prng::expand_running_key;
use crate::y00::{demodulate_bob, dsr_words, symbol_index, transmit, DsrMode, Y00Config};

/// Toeplitz hash `{0,1}^n → {0,1}^τ`.
///
/// The seed holds the first column top to bottom (`τ` bits), then the first
/// row without its corner, left to right (`n − 1` bits). So
/// `T[i][j] = seed[i − j]` for `i ≥ j` and `seed[τ − 1 + j − i]` otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashSpec {
    n: usize,
    tau: usize,
    seed: Vec<u8>,
}

impl HashSpec {
    pub fn new(n: usize, tau: usize, seed: Vec<u8>) -> Result<Self> {
        if tau == 0 || tau > n {
            return invalid(format!("output width {tau} outside 1..={n}"));
        }
        if seed.len() != n + tau - 1 {
            return invalid(format!("Toeplitz seed needs {} bits, got {}", n + tau - 1, seed.len()));
        }
        if seed.iter().any(|&b| b > 1) {
            return invalid("seed bits must be 0 or 1");
        }
        Ok(HashSpec { n, tau, seed })
    }

    pub fn random(n: usize, tau: usize, rng: &mut impl Rng) -> Result<Self> {
        let seed = (0..(n + tau).saturating_sub(1)).map(|_| rng.random_range(0..2u8)).collect();
        Self::new(n, tau, seed)
    }

    /// Seed taken from the low `n + τ − 1` bits of `word`, bit `k` = seed[k].
    fn from_word(n: usize, tau: usize, word: u64) -> Self {
        let seed = (0..n + tau - 1).map(|k| ((word >> k) & 1) as u8).collect();
        HashSpec { n, tau, seed }
    }

    pub fn input_bits(&self) -> usize {
        self.n
    }

    pub fn output_bits(&self) -> usize {
        self.tau
    }

    pub fn seed(&self) -> &[u8] {
        &self.seed
    }

    pub fn entry(&self, i: usize, j: usize) -> u8 {
        if i >= j {
            self.seed[i - j]
        } else {
            self.seed[self.tau - 1 + j - i]
        }
    }

    /// Row `i` as a bit mask over input positions (`n ≤ 64`).
    fn row_masks(&self) -> Vec<u64> {
        (0..self.tau)
            .map(|i| (0..self.n).fold(0u64, |acc, j| acc | (self.entry(i, j) as u64) << j))
            .collect()
    }

    pub fn hash(&self, input: &[u8]) -> Result<Vec<u8>> {
        if input.len() != self.n {
            return invalid(format!("hash input has {} bits, expected {}", input.len(), self.n));
        }
        Ok((0..self.tau)
            .map(|i| input.iter().enumerate().fold(0u8, |acc, (j, &b)| acc ^ (self.entry(i, j) & b)))
            .collect())
    }
}

pub fn toeplitz_hash(spec: &HashSpec, input: &[u8]) -> Result<Vec<u8>> {
    spec.hash(input)
}

fn hash_word(masks: &[u64], x: u64) -> usize {
    masks.iter().enumerate().fold(0, |acc, (i, &m)| acc | (((m & x).count_ones() & 1) as usize) << i)
}

/// `ε = 2^((τ − H∞)/2)`.
pub fn epsilon(tau: f64, h_inf: f64) -> f64 {
    ((tau - h_inf) / 2.0).exp2()
}

/// `2ε + 2^(−τ)`.
pub fn guess_bound(tau: f64, h_inf: f64) -> f64 {
    2.0 * epsilon(tau, h_inf) + (-tau).exp2()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauChoice {
    pub h_inf: f64,
    pub tau_real: f64,
    /// `⌊H∞/3⌋`, the length used for concrete hashing.
    pub tau: usize,
    pub epsilon: f64,
    pub guess_bound: f64,
    /// Integer `τ ∈ [1, H∞]` minimizing `2ε + 2^(−τ)`.
    pub grid_argmin: Option<usize>,
}

pub fn optimal_tau(h_inf: f64) -> Result<TauChoice> {
    if !(h_inf > 0.0) || !h_inf.is_finite() {
        return Err(Error::RefreshRefused(format!("no extractable min-entropy (H∞ = {h_inf})")));
    }
    let tau_real = h_inf / 3.0;
    let tau = tau_real.floor() as usize;
    let grid_argmin = (1..=h_inf.floor() as usize)
        .map(|t| (t, guess_bound(t as f64, h_inf)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(t, _)| t);
    Ok(TauChoice {
        h_inf,
        tau_real,
        tau,
        epsilon: epsilon(tau as f64, h_inf),
        guess_bound: guess_bound(tau as f64, h_inf),
        grid_argmin,
    })
}

/// Joint law `Pr(c, x)` of an `n`-bit source `x` and a side value `c`, kept
/// as sparse support lists per `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub n: usize,
    pub cells: Vec<Vec<(u64, f64)>>,
}

impl Source {
    pub fn new(n: usize, cells: Vec<Vec<(u64, f64)>>) -> Result<Self> {
        if n == 0 || n > 32 {
            return invalid(format!("source width {n} outside 1..=32"));
        }
        let total: f64 = cells.iter().flatten().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 || cells.iter().flatten().any(|&(x, p)| x >> n != 0 || !(p >= 0.0)) {
            return invalid("source must be a probability law on n-bit values");
        }
        Ok(Source { n, cells })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        let p = (-(n as f64)).exp2();
        Self::new(n, vec![(0..1u64 << n).map(|x| (x, p)).collect()])
    }

    pub fn point_mass(n: usize, x: u64) -> Result<Self> {
        Self::new(n, vec![vec![(x, 1.0)]])
    }

    /// `x` uniform on a random subset of size `2^k` chosen per `c`, so that
    /// `H∞(X|C) = k` exactly.
    pub fn flat_subsets(n: usize, k: usize, conditions: usize, rng: &mut impl Rng) -> Result<Self> {
        if k > n {
            return invalid("subset larger than the input space");
        }
        let p = 1.0 / (conditions as f64 * (1u64 << k) as f64);
        let cells = (0..conditions)
            .map(|_| {
                let mut all: Vec<u64> = (0..1u64 << n).collect();
                for i in 0..(1usize << k) {
                    let j = rng.random_range(i..all.len());
                    all.swap(i, j);
                }
                all.truncate(1 << k);
                all.into_iter().map(|x| (x, p)).collect()
            })
            .collect();
        Self::new(n, cells)
    }

    /// `H∞(X | C) = −log2 Σ_c max_x Pr(c, x)`.
    pub fn h_inf(&self) -> f64 {
        -self.cells.iter().map(|c| c.iter().map(|&(_, p)| p).fold(0.0, f64::max)).sum::<f64>().log2()
    }

    fn support(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }
}

/// Exact mode covers `n ≤ 20`, at most `2^10` side values and at most this
/// many (seed, support point) pairs.
pub const EXACT_WORK_CAP: u128 = 1 << 32;
pub const EXACT_MAX_INPUT: usize = 20;
pub const EXACT_MAX_CONDITIONS: usize = 1 << 10;
/// Seeds drawn when the exact sum is out of reach.
pub const MC_SEEDS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LhlReport {
    pub n: usize,
    pub tau: usize,
    pub h_inf: f64,
    pub epsilon: f64,
    /// `Σ_{c,z} |Pr(c, h(X) = z) − Pr(c)·2^(−τ)|` averaged over hash seeds.
    pub l1_distance: f64,
    /// Half of `l1_distance`.
    pub statistical_distance: f64,
    /// Terms with `Pr(z|c) ≥ 2^(−τ)` of `l1_distance`.
    pub positive_part: f64,
    /// Terms with `Pr(z|c) < 2^(−τ)`; never negative.
    pub negative_part: f64,
    /// Best single guess of `h(X)` per (seed, c), averaged.
    pub guess_probability: f64,
    pub guess_bound: f64,
    /// False for Monte Carlo estimates over seeds.
    pub certified: bool,
    /// Three standard errors of the seed average (0 when exact).
    pub ci_half_width: f64,
    pub seeds: u64,
}

impl LhlReport {
    /// `l1_distance ≤ 2ε`, with the Monte Carlo error added when not exact.
    pub fn within_bound(&self) -> bool {
        self.l1_distance - self.ci_half_width <= 2.0 * self.epsilon + 1e-12
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct SeedStats {
    l1: f64,
    pos: f64,
    neg: f64,
    guess: f64,
}

fn seed_stats(masks: &[u64], tau: usize, src: &Source) -> SeedStats {
    let uniform = (-(tau as f64)).exp2();
    let mut hist = vec![0.0; 1 << tau];
    let mut st = SeedStats::default();
    for cell in &src.cells {
        hist.iter_mut().for_each(|h| *h = 0.0);
        let mut pc = 0.0;
        for &(x, p) in cell {
            hist[hash_word(masks, x)] += p;
            pc += p;
        }
        for &h in &hist {
            let d = h - pc * uniform;
            if d >= 0.0 {
                st.pos += d;
            } else {
                st.neg -= d;
            }
        }
        st.guess += hist.iter().copied().fold(0.0, f64::max);
    }
    st.l1 = st.pos + st.neg;
    st
}

/// Distance of `(h_S(X), S, C)` from `(U, S, C)` for a uniformly drawn
/// Toeplitz seed `S`. Exact over every seed when the instance fits, else a
/// Monte Carlo average over `MC_SEEDS` seeds flagged as non-certifying.
pub fn sd_from_uniform(tau: usize, src: &Source, exact: bool, mc_seed: u64) -> Result<LhlReport> {
    let n = src.n;
    let h_inf = src.h_inf();
    if tau > n {
        return invalid(format!("output width {tau} exceeds input width {n}"));
    }
    if tau == 0 {
        return Ok(LhlReport {
            n,
            tau,
            h_inf,
            epsilon: epsilon(0.0, h_inf),
            l1_distance: 0.0,
            statistical_distance: 0.0,
            positive_part: 0.0,
            negative_part: 0.0,
            guess_probability: 1.0,
            guess_bound: guess_bound(0.0, h_inf),
            certified: true,
            ci_half_width: 0.0,
            seeds: 1,
        });
    }
    let seed_bits = n + tau - 1;
    let work = (1u128 << seed_bits) * src.support() as u128;
    let feasible = n <= EXACT_MAX_INPUT && src.cells.len() <= EXACT_MAX_CONDITIONS && work <= EXACT_WORK_CAP;
    let (stats, seeds, certified): (Vec<SeedStats>, u64, bool) = if exact && feasible {
        let seeds = 1u64 << seed_bits;
        let all = (0..seeds)
            .into_par_iter()
            .map(|w| seed_stats(&HashSpec::from_word(n, tau, w).row_masks(), tau, src))
            .collect();
        (all, seeds, true)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(mc_seed);
        let words: Vec<u64> = (0..MC_SEEDS).map(|_| rng.random::<u64>() & ((1u64 << seed_bits) - 1)).collect();
        let all = words.par_iter().map(|&w| seed_stats(&HashSpec::from_word(n, tau, w).row_masks(), tau, src)).collect();
        (all, MC_SEEDS as u64, false)
    };
    let k = stats.len() as f64;
    let mean = |f: fn(&SeedStats) -> f64| stats.iter().map(f).sum::<f64>() / k;
    let l1 = mean(|s| s.l1);
    let ci_half_width = if certified {
        0.0
    } else {
        let var = stats.iter().map(|s| (s.l1 - l1).powi(2)).sum::<f64>() / (k - 1.0);
        3.0 * (var / k).sqrt()
    };
    Ok(LhlReport {
        n,
        tau,
        h_inf,
        epsilon: epsilon(tau as f64, h_inf),
        l1_distance: l1,
        statistical_distance: l1 / 2.0,
        positive_part: mean(|s| s.pos),
        negative_part: mean(|s| s.neg),
        guess_probability: mean(|s| s.guess),
        guess_bound: guess_bound(tau as f64, h_inf),
        certified,
        ci_half_width,
        seeds,
    })
}

/// Default requirement for "bound well below threshold".
pub const DEFAULT_MARGIN: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractorParams {
    pub h_inf: f64,
    pub tau: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub p_th: f64,
}

impl ExtractorParams {
    pub fn new(h_inf: f64, tau: f64, kappa: f64, p_th: f64) -> Result<Self> {
        if !(h_inf >= kappa) {
            return invalid(format!("min-entropy {h_inf} below the claimed floor {kappa}"));
        }
        if !(tau >= 0.0) || !(p_th > 0.0 && p_th < 1.0) {
            return invalid("need τ ≥ 0 and 0 < p_th < 1");
        }
        let p = ExtractorParams { h_inf, tau, kappa, epsilon: epsilon(tau, h_inf), p_th };
        let b = guess_bound(tau, h_inf);
        if !(b > 0.0 && b <= 1.0) {
            return invalid(format!("guess bound {b} outside (0, 1]"));
        }
        Ok(p)
    }

    /// Optimal sacrifice from the more conservative of the two min-entropy
    /// forms (averaged over keys, or Eve's best key per ciphertext).
    pub fn conservative(average: f64, best_key: f64, p_th: f64) -> Result<Self> {
        let h = average.min(best_key);
        Self::new(h, h / 3.0, h, p_th)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuessBound {
    pub bound: f64,
    /// `p_th / bound`.
    pub margin: f64,
    pub required_margin: f64,
    pub satisfied: bool,
}

pub fn guess_probability_bound(params: &ExtractorParams, required_margin: f64) -> GuessBound {
    let bound = 2.0 * params.epsilon + (-params.tau).exp2();
    let margin = params.p_th / bound;
    GuessBound { bound, margin, required_margin, satisfied: margin >= required_margin }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HinfMode {
    /// Enumerates the repeated-slot guessing game.
    Exact,
    /// `P_guess ≤ ½(1 + min(1, k·TV))` from one slot's total variation.
    Bound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HinfEstimate {
    pub mode: HinfMode,
    /// Min-entropy of one payload bit carried over `repetition` slots.
    pub per_bit: f64,
    pub total: f64,
    pub certified: bool,
}

/// Cap on multiset terms in the exact repeated-slot enumeration.
pub const HINF_TERM_CAP: u128 = 4_000_000;

/// Per-slot pairs `(Pr(r, c | x=0), Pr(r, c | x=1))` for Eve knowing the
/// running key word and `Δx` but not any true-random DSR word. Uses the
/// mapping table in force at slot 0.
fn slot_likelihoods(cfg: &Y00Config) -> Result<Vec<(f64, f64)>> {
    let m = cfg.m;
    let table = cfg.mapping.schedule(1).at(0).to_vec();
    let laws: Vec<Vec<f64>> = (0..2 * m).map(|k| symbol_error_dist(k, cfg)).collect::<Result<_>>()?;
    let ds: Vec<usize> = if cfg.dsr == DsrMode::TrueRandom { (0..m).collect() } else { vec![0] };
    let pr = 1.0 / (2 * m * ds.len()) as f64;
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for s in 0..m {
        for dx in 0..2u8 {
            let mut w = [vec![0.0; 2 * m], vec![0.0; 2 * m]];
            for x in 0..2u8 {
                for &d in &ds {
                    let sent = symbol_index(m, table[s ^ d], table[s], x, dx);
                    for (off, &p) in laws[sent].iter().enumerate() {
                        w[x as usize][(sent + off) % (2 * m)] += pr * p;
                    }
                }
            }
            pairs.extend((0..2 * m).map(|c| (w[0][c], w[1][c])));
        }
    }
    // merge equal pairs so symmetric alphabets shrink
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut merged: Vec<((f64, f64), u64)> = Vec::new();
    for p in pairs {
        match merged.last_mut() {
            Some((q, k)) if (q.0 - p.0).abs() <= 1e-15 && (q.1 - p.1).abs() <= 1e-15 => *k += 1,
            _ => merged.push((p, 1)),
        }
    }
    Ok(merged.into_iter().map(|((a, b), k)| (a * k as f64, b * k as f64)).collect())
}

fn binom(n: u64, k: u64) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `H∞(X | R, C_E)` of the refresh payload, treating payload bits as
/// uniform and key slots as independent.
pub fn hinf_estimate(cfg: &Y00Config, payload_bits: usize, repetition: usize, mode: HinfMode) -> Result<HinfEstimate> {
    if repetition == 0 {
        return invalid("repetition must be at least 1");
    }
    let pairs = slot_likelihoods(cfg)?;
    let guess = match mode {
        HinfMode::Bound => {
            let tv: f64 = pairs.iter().map(|&(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
            0.5 * (1.0 + (repetition as f64 * tv).min(1.0))
        }
        HinfMode::Exact => {
            let terms = binom((pairs.len() + repetition - 1) as u64, repetition as u64);
            if terms > HINF_TERM_CAP {
                return Err(Error::Infeasible(format!("{terms} multiset terms exceed {HINF_TERM_CAP}")));
            }
            let mut total = 0.0;
            let mut counts = vec![0usize; pairs.len()];
            multisets(&pairs, repetition, 0, &mut counts, &mut |counts| {
                let coef = multinomial(counts);
                let (mut a, mut b) = (1.0, 1.0);
                for (&(pa, pb), &k) in pairs.iter().zip(counts) {
                    a *= pa.powi(k as i32);
                    b *= pb.powi(k as i32);
                }
                total += coef * a.max(b);
            });
            0.5 * total
        }
    };
    let per_bit = -guess.log2();
    Ok(HinfEstimate { mode, per_bit, total: per_bit * payload_bits as f64, certified: mode == HinfMode::Exact })
}

fn multisets(pairs: &[(f64, f64)], left: usize, from: usize, counts: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if from == pairs.len() - 1 {
        counts[from] = left;
        f(counts);
        counts[from] = 0;
        return;
    }
    for k in (0..=left).rev() {
        counts[from] = k;
        multisets(pairs, left - k, from + 1, counts, f);
    }
    counts[from] = 0;
}

fn multinomial(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let mut c = 1.0;
    let mut acc = 0;
    for &k in counts {
        for i in 1..=k {
            acc += 1;
            c = c * acc as f64 / i as f64;
        }
    }
    debug_assert_eq!(acc, n);
    c
}

/// Shared secrets `(k, Δk)`: the seeds of the two running-key generators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPair {
    pub k: Vec<u8>,
    pub dk: Vec<u8>,
}

/// Confirmation tag appended to the payload so Bob can detect residual errors.
pub const TAG_BITS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefreshParams {
    /// Width of the fresh random string `k_R`.
    pub kr_bits: usize,
    /// Odd repetition factor of the payload code.
    pub repetition: usize,
    /// Extra binary-symmetric flips on Bob's decided bits.
    pub bob_crossover: f64,
    /// Coded-payload positions flipped after Bob's detection.
    pub tamper: Vec<usize>,
    pub seed: u64,
}

/// Payload layout: hash seed, then `k_R`, then the tag, each bit repeated.
/// Lengths are reported for auditing and are never sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefreshLayout {
    pub hash_seed_bits: usize,
    pub kr_bits: usize,
    pub tag_bits: usize,
    pub repetition: usize,
    pub coded_bits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefreshTranscript {
    pub layout: RefreshLayout,
    pub new_keys: KeyPair,
    /// Bob's raw slot errors before repetition decoding.
    pub bob_slot_errors: usize,
    /// Eve's decided symbol per coded slot.
    pub eve_symbols: Vec<usize>,
}

/// Remaining breach budget: refused once `elapsed_periods` reaches the time
/// to threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreachBudget {
    pub params: BreachParams,
    pub elapsed_periods: f64,
}

fn confirmation_tag(bits: &[u8]) -> Vec<u8> {
    let digest = Sha256::digest(bits);
    (0..TAG_BITS).map(|i| (digest[i / 8] >> (7 - i % 8)) & 1).collect()
}

/// One refresh round. Alice sends a random `(hash seed, k_R)` as plaintext
/// under the current keys, Bob decodes it and both set
/// `(k_New, Δk_New) = h(k_R)`. Both key pairs are replaced together or not
/// at all.
pub fn refresh_roundtrip(
    cfg: &Y00Config,
    alice: &mut KeyPair,
    bob: &mut KeyPair,
    params: &RefreshParams,
    budget: Option<&BreachBudget>,
) -> Result<RefreshTranscript> {
    cfg.validate()?;
    if let Some(b) = budget {
        let limit = time_to_threshold(&b.params);
        if b.elapsed_periods >= limit {
            return Err(Error::RefreshRefused(format!(
                "{} periods elapsed, threshold reached at {limit}",
                b.elapsed_periods
            )));
        }
    }
    if params.repetition.is_multiple_of(2) {
        return invalid("repetition factor must be odd");
    }
    if !(0.0..=0.5).contains(&params.bob_crossover) {
        return invalid("crossover must lie in [0, 1/2]");
    }
    let tau = cfg.prng_s.seed_width() + cfg.prng_dx.seed_width();
    let n = params.kr_bits;
    if tau > n {
        return invalid(format!("k_R of {n} bits cannot yield {tau} key bits"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let hash = HashSpec::random(n, tau, &mut rng)?;
    let kr: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
    let mut payload = hash.seed().to_vec();
    payload.extend_from_slice(&kr);
    payload.extend(confirmation_tag(&payload));
    let layout = RefreshLayout {
        hash_seed_bits: hash.seed().len(),
        kr_bits: n,
        tag_bits: TAG_BITS,
        repetition: params.repetition,
        coded_bits: payload.len() * params.repetition,
    };
    let coded: Vec<u8> = payload.iter().flat_map(|&b| std::iter::repeat_n(b, params.repetition)).collect();

    let r_alice = expand_running_key(&alice.k, &alice.dk, cfg, coded.len())?;
    let trace = transmit(&r_alice, &coded, cfg, &mut rng)?;
    let eve = tap_and_measure(&trace, cfg, params.seed ^ 0x4576_6531)?;
    let eve_symbols = decide_all(&eve, &eve_regions(cfg));

    let r_bob = expand_running_key(&bob.k, &bob.dk, cfg, coded.len())?;
    let keyed = match cfg.dsr {
        DsrMode::Keyed(_) => Some(dsr_words(cfg, coded.len(), &mut rng)),
        _ => None,
    };
    let received = bob_receive(&trace, cfg, params.seed ^ 0x426f_6231);
    let mut bits = demodulate_bob(&received, &r_bob, cfg, keyed.as_deref(), None)?.bits;
    let mut flip_rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x464c_4950);
    for b in bits.iter_mut() {
        if flip_rng.random::<f64>() < params.bob_crossover {
            *b ^= 1;
        }
    }
    for &i in &params.tamper {
        if let Some(b) = bits.get_mut(i) {
            *b ^= 1;
        }
    }
    let bob_slot_errors = bits.iter().zip(&coded).filter(|(a, b)| a != b).count();
    let decoded: Vec<u8> = bits
        .chunks(params.repetition)
        .map(|c| (2 * c.iter().map(|&b| b as usize).sum::<usize>() > c.len()) as u8)
        .collect();
    let body = &decoded[..decoded.len() - TAG_BITS];
    if confirmation_tag(body) != decoded[decoded.len() - TAG_BITS..] {
        return Err(Error::DecodeFailure("refresh tag mismatch; retry".into()));
    }
    let bob_hash = HashSpec::new(n, tau, body[..layout.hash_seed_bits].to_vec())?;
    let bob_out = bob_hash.hash(&body[layout.hash_seed_bits..])?;
    let alice_out = hash.hash(&kr)?;
    if bob_out != alice_out {
        return Err(Error::DecodeFailure("parties derived different keys".into()));
    }
    let ks = cfg.prng_s.seed_width();
    let new_keys = KeyPair { k: alice_out[..ks].to_vec(), dk: alice_out[ks..].to_vec() };
    // a zero LFSR seed would kill the running key
    cfg.prng_s
        .with_seed(&new_keys.k)
        .and_then(|_| cfg.prng_dx.with_seed(&new_keys.dk))
        .map_err(|e| Error::RefreshRefused(format!("unusable new key: {e}")))?;
    *alice = new_keys.clone();
    *bob = new_keys.clone();
    Ok(RefreshTranscript { layout, new_keys, bob_slot_errors, eve_symbols })
}
