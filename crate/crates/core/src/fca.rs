//! Fast correlation attack on the `s` generator, plus the plain
//! known-plaintext break of an additive LFSR stream cipher.
//!
//! Eve turns each quantized symbol decision into an estimate of one bit of
//! the basis word `s(t)`. Because words are chopped from the generator
//! stream, the estimates form a noisy copy of the decimated sequence
//! `u(t) = b(step·t + offset)`. Sparse parity checks of `u` drive an
//! iterative bit-flipping decoder; the decoded window is mapped back to the
//! generator seed by linear algebra over GF(2).

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{decide_all, eve_regions, symbol_error_dist, tap_and_measure};
use crate::error::{invalid, Error, Result};
use crate::prng::{expand_running_key, lfsr_stream, GeneratorSpec, LfsrSpec};
use crate::y00::{transmit, DsrMode, MappingKind, Y00Config};

/// Connection polynomial found by Berlekamp–Massey: `s(n) = Σ c_i s(n−i)`
/// for `i = 1..=complexity`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearRecurrence {
    pub complexity: usize,
    /// `c[0] = 1`, `c[i]` for `i ≥ 1` as above.
    pub connection: Vec<u8>,
}

impl LinearRecurrence {
    /// Characteristic-polynomial exponents `{L} ∪ {L − i : c_i = 1}`.
    pub fn polynomial_exponents(&self) -> Vec<usize> {
        let l = self.complexity;
        let mut e: Vec<usize> = (1..=l).filter(|&i| self.connection[i] == 1).map(|i| l - i).collect();
        e.push(l);
        e.sort_unstable();
        e
    }

    /// The recurrence as an LFSR with the given initial bits.
    pub fn to_lfsr(&self, seed: &[u8]) -> Result<LfsrSpec> {
        let e = self.polynomial_exponents();
        if e[0] != 0 {
            return invalid("recurrence is singular (no constant term)");
        }
        LfsrSpec::new(self.complexity, &e[1..], seed)
    }

    /// Continues `prefix` (at least `complexity` bits) to length `n`.
    pub fn extend(&self, prefix: &[u8], n: usize) -> Vec<u8> {
        let l = self.complexity;
        let mut out = prefix[..l.min(prefix.len())].to_vec();
        while out.len() < n {
            let k = out.len();
            let mut b = 0u8;
            for i in 1..=l {
                b ^= self.connection[i] & out[k - i];
            }
            out.push(b);
        }
        out.truncate(n);
        out
    }
}

/// Shortest linear recurrence generating `s`.
pub fn berlekamp_massey(s: &[u8]) -> LinearRecurrence {
    let n = s.len();
    let mut c = vec![0u8; n + 1];
    let mut b = vec![0u8; n + 1];
    c[0] = 1;
    b[0] = 1;
    let mut l = 0usize;
    let mut m = 1usize;
    for k in 0..n {
        let mut d = s[k];
        for i in 1..=l {
            d ^= c[i] & s[k - i];
        }
        if d == 0 {
            m += 1;
        } else if 2 * l <= k {
            let t = c.clone();
            for i in m..=n {
                c[i] ^= b[i - m];
            }
            l = k + 1 - l;
            b = t;
            m = 1;
        } else {
            for i in m..=n {
                c[i] ^= b[i - m];
            }
            m += 1;
        }
    }
    c.truncate(l + 1);
    LinearRecurrence { complexity: l, connection: c }
}

/// Known-plaintext break of `c = x ⊕ s` with `s` an LFSR stream: the seed is
/// the first `L` keystream bits, confirmed by synthesizing the recurrence.
pub fn recover_key_conventional(c: &[u8], x: &[u8], spec: &LfsrSpec) -> Result<Vec<u8>> {
    let l = spec.degree();
    if c.len() != x.len() {
        return invalid("ciphertext and plaintext lengths differ");
    }
    if c.len() < 2 * l {
        return Err(Error::DecodeFailure(format!(
            "{} keystream bits cannot pin down a degree-{l} recurrence (need {})",
            c.len(),
            2 * l
        )));
    }
    let s: Vec<u8> = c.iter().zip(x).map(|(a, b)| a ^ b).collect();
    let rec = berlekamp_massey(&s);
    if rec.complexity > l || rec.extend(&s, s.len()) != s {
        return Err(Error::DecodeFailure("keystream is not generated by a short LFSR".into()));
    }
    let seed = s[..l].to_vec();
    let check = spec.with_seed(&seed)?;
    if lfsr_stream(&check, s.len()) != s {
        return Err(Error::DecodeFailure("keystream does not match the declared polynomial".into()));
    }
    Ok(seed)
}

/// Noisy observations of `u(t) = b(step·t + offset)` for the `s` generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyKeystream {
    pub bits: Vec<u8>,
    /// Posterior error probability of each observed bit.
    pub crossover: Vec<f64>,
    pub step: usize,
    pub offset: usize,
    /// Crossover of the chosen word bit averaged over uniform keys.
    pub mean_crossover: f64,
}

impl NoisyKeystream {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Below `0.5 − LEAKY_MARGIN` a word bit counts as leaky.
pub const LEAKY_MARGIN: f64 = 0.01;

fn word_bit(word: usize, j: usize, w: usize) -> u8 {
    ((word >> (w - 1 - j)) & 1) as u8
}

/// `P(detected symbol | key word s)` for Eve, averaging over the unknown
/// polarity and, under DSR, the unknown randomization word.
fn detection_given_word(cfg: &Y00Config) -> Result<Vec<Vec<f64>>> {
    let m = cfg.m;
    let two_m = 2 * m;
    let table = &cfg.mapping.table;
    let laws: Vec<Vec<f64>> = (0..two_m).map(|k| symbol_error_dist(k, cfg)).collect::<Result<_>>()?;
    let randomizers: Vec<usize> = match cfg.dsr {
        DsrMode::None => vec![0],
        _ => (0..m).collect(),
    };
    Ok((0..m)
        .map(|s| {
            let mut row = vec![0.0; two_m];
            let weight = 1.0 / (2 * randomizers.len()) as f64;
            for &d in &randomizers {
                let base = table[s ^ d];
                for parity in 0..2 {
                    let sent = base + m * parity;
                    for (delta, &p) in laws[sent].iter().enumerate() {
                        row[(sent + delta) % two_m] += weight * p;
                    }
                }
            }
            row
        })
        .collect())
}

/// Averaged crossover of each word bit when Eve estimates it by the
/// posterior-majority rule from her symbol decision.
pub fn word_bit_crossovers(cfg: &Y00Config) -> Result<Vec<f64>> {
    Ok(leak_tables(cfg)?.into_iter().map(|t| t.mean_crossover).collect())
}

struct LeakTable {
    /// Per detected symbol: estimated bit and its posterior error probability.
    estimate: Vec<(u8, f64)>,
    mean_crossover: f64,
}

fn leak_tables(cfg: &Y00Config) -> Result<Vec<LeakTable>> {
    cfg.validate()?;
    let w = cfg.word_bits() as usize;
    let m = cfg.m;
    if matches!(cfg.mapping.kind, MappingKind::Scrambled(_)) {
        // an unknown time-varying table leaves every word bit uniform
        return Ok((0..w)
            .map(|_| LeakTable { estimate: vec![(0, 0.5); 2 * m], mean_crossover: 0.5 })
            .collect());
    }
    let cond = detection_given_word(cfg)?;
    Ok((0..w)
        .map(|j| {
            let mut estimate = Vec::with_capacity(2 * m);
            let mut mean = 0.0;
            for y in 0..2 * m {
                let (mut p0, mut p1) = (0.0, 0.0);
                for (s, row) in cond.iter().enumerate() {
                    if word_bit(s, j, w) == 0 {
                        p0 += row[y];
                    } else {
                        p1 += row[y];
                    }
                }
                let total = p0 + p1;
                let (bit, err) = if total == 0.0 {
                    (0, 0.5)
                } else if p1 > p0 {
                    (1, p0 / total)
                } else {
                    (0, p1 / total)
                };
                // uniform prior over words: Pr(y) = total / M
                mean += err * total / m as f64;
                estimate.push((bit, err));
            }
            LeakTable { estimate, mean_crossover: mean }
        })
        .collect())
}

/// Turns Eve's symbol decisions into a noisy copy of the least-hidden bit of
/// each basis word.
pub fn extract_leaky_bits(outcomes: &[usize], cfg: &Y00Config) -> Result<NoisyKeystream> {
    let tables = leak_tables(cfg)?;
    let (j, best) = tables
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.mean_crossover.total_cmp(&b.1.mean_crossover))
        .expect("word has at least one bit");
    if best.mean_crossover >= 0.5 - LEAKY_MARGIN {
        return Err(Error::NoLeakyBits(best.mean_crossover));
    }
    if outcomes.iter().any(|&y| y >= 2 * cfg.m) {
        return invalid("symbol decision out of range");
    }
    let (bits, crossover) = outcomes.iter().map(|&y| best.estimate[y]).unzip();
    Ok(NoisyKeystream {
        bits,
        crossover,
        step: cfg.word_bits() as usize,
        offset: j,
        mean_crossover: best.mean_crossover,
    })
}

/// Sparse parity checks: each template `{0 = e_0 < e_1 < ...}` asserts
/// `Σ u(t + e_k) = 0` for every admissible `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityCheckSet {
    pub templates: Vec<Vec<usize>>,
}

impl ParityCheckSet {
    pub fn max_weight(&self) -> usize {
        self.templates.iter().map(|t| t.len()).max().unwrap_or(0)
    }

    /// Number of check instances inside a window of `n` bits.
    pub fn instances(&self, n: usize) -> usize {
        self.templates
            .iter()
            .map(|t| n.saturating_sub(*t.last().unwrap()))
            .sum()
    }
}

/// Largest number of templates kept, lowest span first.
pub const MAX_TEMPLATES: usize = 256;

fn poly_mul(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut acc: HashMap<usize, u8> = HashMap::new();
    for &x in a {
        for &y in b {
            *acc.entry(x + y).or_default() ^= 1;
        }
    }
    let mut e: Vec<usize> = acc.into_iter().filter(|(_, v)| *v == 1).map(|(k, _)| k).collect();
    e.sort_unstable();
    e
}

/// Parity-check templates for sequences obeying `spec`'s recurrence:
/// the polynomial's repeated squares, its cube, and every trinomial multiple
/// `1 + x^a + x^b` with `b < horizon` (found by matching residues of `x^a`).
/// Each template is checked against a noise-free stream before use.
pub fn derive_parity_checks(spec: &LfsrSpec, max_weight: usize, horizon: usize) -> Result<ParityCheckSet> {
    let l = spec.degree();
    if horizon <= l {
        return invalid(format!("horizon {horizon} must exceed the degree {l}"));
    }
    if max_weight < 2 {
        return invalid("parity checks need weight >= 2");
    }
    let base = spec.polynomial_exponents();
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    let mut scale = 1;
    while l * scale < horizon {
        candidates.push(base.iter().map(|e| e * scale).collect());
        scale *= 2;
    }
    if 3 * l < horizon {
        candidates.push(poly_mul(&base, &poly_mul(&base, &base)));
    }
    if max_weight >= 3 && l < 64 {
        // residue of x^a modulo the polynomial, as an L-bit vector
        let reduce_mask: u64 = base.iter().filter(|&&e| e < l).fold(0, |m, &e| m | (1 << e));
        let top = 1u64 << (l - 1);
        let mut residue = 1u64;
        let mut seen: HashMap<u64, usize> = HashMap::with_capacity(horizon);
        for a in 0..horizon {
            if a > 0 {
                let carry = residue & top != 0;
                residue = (residue << 1) & ((top << 1) - 1);
                if carry {
                    residue ^= reduce_mask;
                }
            }
            if a > 0 {
                if let Some(&b) = seen.get(&(residue ^ 1)) {
                    if b > 0 {
                        candidates.push(vec![0, b, a]);
                    }
                }
            }
            seen.entry(residue).or_insert(a);
        }
    }
    let mut templates: Vec<Vec<usize>> = candidates
        .into_iter()
        .filter(|t| t.len() <= max_weight && *t.last().unwrap() < horizon)
        .collect();
    templates.sort_by_key(|t| (*t.last().unwrap(), t.clone()));
    templates.dedup();
    templates.truncate(MAX_TEMPLATES);

    let probe = spec.with_seed(&{
        let mut s = vec![0u8; l];
        s[0] = 1;
        s
    })?;
    let stream = lfsr_stream(&probe, horizon);
    for t in &templates {
        let span = *t.last().unwrap();
        if (0..horizon - span).any(|i| t.iter().fold(0u8, |a, &e| a ^ stream[i + e]) != 0) {
            return Err(Error::DecodeFailure(format!("derived check {t:?} fails on a clean stream")));
        }
    }
    Ok(ParityCheckSet { templates })
}

/// Recurrence obeyed by `u(t) = b(step·t + offset)`. Power-of-two steps
/// keep the generator's own polynomial; other steps synthesize it from a
/// reference stream.
pub fn decimated_recurrence(spec: &LfsrSpec, step: usize) -> Result<LfsrSpec> {
    let l = spec.degree();
    let mut seed = vec![0u8; l];
    seed[0] = 1;
    if step.is_power_of_two() {
        return spec.with_seed(&seed);
    }
    let reference = lfsr_stream(spec, step * 2 * l + step);
    let u: Vec<u8> = reference.iter().step_by(step).copied().collect();
    let rec = berlekamp_massey(&u);
    let mut dseed = vec![0u8; rec.complexity];
    if rec.complexity == 0 {
        return Err(Error::DecodeFailure("decimated sequence is identically zero".into()));
    }
    dseed[0] = 1;
    rec.to_lfsr(&dseed)
}

/// Linear dependence of each generator output bit on the seed bits.
fn seed_masks(spec: &LfsrSpec, upto: usize) -> Vec<u64> {
    let l = spec.degree();
    let mut masks: Vec<u64> = (0..l.min(upto)).map(|i| 1u64 << i).collect();
    let taps: Vec<usize> = spec.polynomial_exponents().into_iter().filter(|&e| e < l).collect();
    while masks.len() < upto {
        let t = masks.len() - l;
        masks.push(taps.iter().fold(0u64, |acc, &j| acc ^ masks[t + j]));
    }
    masks
}

/// Solves `mask_i · seed = rhs_i` over GF(2). Returns `None` when the system
/// is inconsistent; free variables are set to zero.
fn solve_gf2(eqs: &[(u64, u8)], l: usize) -> Option<(Vec<u8>, usize)> {
    let mut pivots: Vec<(u64, u8)> = Vec::new();
    for &(m, r) in eqs {
        let (mut m, mut r) = (m, r);
        for &(pm, pr) in &pivots {
            if m & (1u64 << pm.trailing_zeros()) != 0 {
                m ^= pm;
                r ^= pr;
            }
        }
        if m == 0 {
            if r != 0 {
                return None;
            }
            continue;
        }
        let bit = 1u64 << m.trailing_zeros();
        for p in pivots.iter_mut() {
            if p.0 & bit != 0 {
                p.0 ^= m;
                p.1 ^= r;
            }
        }
        pivots.push((m, r));
    }
    let mut seed = vec![0u8; l];
    for &(m, r) in &pivots {
        seed[m.trailing_zeros() as usize] = r;
    }
    Some((seed, pivots.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub seed: Vec<u8>,
    /// Fraction of parity-check instances satisfied by the decoded stream.
    pub confidence: f64,
    /// Fraction of observed bits agreeing with the stream the seed generates.
    pub agreement: f64,
    pub iterations: usize,
    pub converged: bool,
    pub low_confidence: bool,
}

/// Iteration cap for the bit-flipping decoder.
pub const MAX_FLIP_ITERATIONS: usize = 30;

/// Below this agreement the candidate is flagged as a likely miss.
const AGREEMENT_FLOOR: f64 = 0.5 + LEAKY_MARGIN;

struct Decoded {
    bits: Vec<u8>,
    llr: Vec<f64>,
    iterations: usize,
    converged: bool,
    satisfied: f64,
}

fn check_parity(bits: &[u8], checks: &ParityCheckSet) -> (usize, usize) {
    let n = bits.len();
    let mut ok = 0;
    let mut total = 0;
    for t in &checks.templates {
        let span = *t.last().unwrap();
        for i in 0..n.saturating_sub(span) {
            total += 1;
            if t.iter().fold(0u8, |a, &e| a ^ bits[i + e]) == 0 {
                ok += 1;
            }
        }
    }
    (ok, total)
}

/// Weighted bit flipping: every check containing a bit votes for or against
/// its current value with weight `2·atanh(Π (1 − 2p_k))` over the other
/// members; bits whose total log-likelihood turns negative are flipped.
fn flip_decode(ks: &NoisyKeystream, checks: &ParityCheckSet) -> Decoded {
    let n = ks.len();
    let mut bits = ks.bits.clone();
    let clamp = |p: f64| p.clamp(1e-9, 0.5);
    let mut p: Vec<f64> = ks.crossover.iter().map(|&x| clamp(x)).collect();
    let prior: Vec<f64> = p.iter().map(|&x| ((1.0 - x) / x).ln()).collect();
    let mut llr = prior.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_FLIP_ITERATIONS {
        iterations += 1;
        let q: Vec<f64> = p.iter().map(|&x| 1.0 - 2.0 * x).collect();
        let mut votes = vec![0.0f64; n];
        for t in &checks.templates {
            let span = *t.last().unwrap();
            for i in 0..n.saturating_sub(span) {
                let mut parity = 0u8;
                let mut prod = 1.0;
                let mut zeros = 0;
                for &e in t {
                    parity ^= bits[i + e];
                    if q[i + e] == 0.0 {
                        zeros += 1;
                    } else {
                        prod *= q[i + e];
                    }
                }
                if zeros > 1 {
                    continue;
                }
                let sign = if parity == 0 { 1.0 } else { -1.0 };
                for &e in t {
                    let k = i + e;
                    let others = if q[k] == 0.0 {
                        prod
                    } else if zeros == 1 {
                        0.0
                    } else {
                        prod / q[k]
                    };
                    let others = others.clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                    votes[k] += sign * 2.0 * others.atanh();
                }
            }
        }
        let mut flips = 0;
        for k in 0..n {
            llr[k] = prior[k] + votes[k];
            if llr[k] < 0.0 {
                bits[k] ^= 1;
                flips += 1;
            }
            p[k] = clamp(1.0 / (1.0 + llr[k].abs().exp()));
        }
        if flips == 0 {
            converged = true;
            break;
        }
    }
    let (ok, total) = check_parity(&bits, checks);
    let satisfied = if total == 0 { 1.0 } else { ok as f64 / total as f64 };
    Decoded { bits, llr, iterations, converged, satisfied }
}

/// Candidate windows of `len` consecutive bits ranked by their weakest
/// reliability.
fn best_windows(llr: &[f64], len: usize, count: usize) -> Vec<usize> {
    let n = llr.len();
    if n < len {
        return vec![];
    }
    let mut scored: Vec<(f64, usize)> = (0..=n - len)
        .step_by(len.max(1) / 2 + 1)
        .map(|s| (llr[s..s + len].iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min), s))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(count).map(|(_, s)| s).collect()
}

/// Decodes `ks` and maps the result back to a seed of the generator `spec`.
pub fn correlation_attack(ks: &NoisyKeystream, checks: &ParityCheckSet, spec: &LfsrSpec) -> Result<AttackOutcome> {
    let n = ks.len();
    let l = spec.degree();
    if ks.crossover.len() != n {
        return invalid("crossover and bit vectors differ in length");
    }
    if ks.mean_crossover >= 0.5 - LEAKY_MARGIN {
        return Err(Error::NoLeakyBits(ks.mean_crossover));
    }
    let urec = decimated_recurrence(spec, ks.step)?;
    let lu = urec.degree();
    if n < 2 * lu.max(l) {
        return invalid(format!("{n} observations are too few for a degree-{l} generator"));
    }
    let decoded = flip_decode(ks, checks);
    let masks = seed_masks(spec, ks.step * n + ks.offset + 1);
    let position = |t: usize| ks.step * t + ks.offset;

    let mut best: Option<(usize, Vec<u8>)> = None;
    for start in best_windows(&decoded.llr, lu, 8) {
        let window = &decoded.bits[start..start + lu];
        if window.iter().all(|&b| b == 0) {
            continue;
        }
        // regenerate u over the whole observation span from this window
        let useed: Vec<u8> = window.to_vec();
        let forward = lfsr_stream(&urec.with_seed(&useed)?, n - start);
        let eqs: Vec<(u64, u8)> = (0..lu.max(l) * 2)
            .filter(|&i| start + i < n)
            .map(|i| (masks[position(start + i)], forward[i]))
            .collect();
        let Some((seed, rank)) = solve_gf2(&eqs, l) else { continue };
        if rank < l || seed.iter().all(|&b| b == 0) {
            continue;
        }
        let stream = lfsr_stream(&spec.with_seed(&seed)?, position(n - 1) + 1);
        let agree = (0..n).filter(|&t| stream[position(t)] == ks.bits[t]).count();
        if best.as_ref().is_none_or(|(a, _)| agree > *a) {
            best = Some((agree, seed));
        }
    }
    let (agree, seed) = best.ok_or_else(|| Error::DecodeFailure("no decodable window".into()))?;
    let agreement = agree as f64 / n as f64;
    Ok(AttackOutcome {
        seed,
        confidence: decoded.satisfied,
        agreement,
        iterations: decoded.iterations,
        converged: decoded.converged,
        low_confidence: !decoded.converged || agreement < AGREEMENT_FLOOR,
    })
}

/// The `s` generator as an LFSR, which the attack requires.
pub fn s_generator(cfg: &Y00Config) -> Result<&LfsrSpec> {
    match &cfg.prng_s {
        GeneratorSpec::Lfsr(spec) => Ok(spec),
        _ => Err(Error::Unsupported("correlation attack needs an LFSR s generator".into())),
    }
}

/// Bit `j` (MSB-first) of each `w`-bit word.
pub fn reference_word_bits(words: &[u32], w: u32, j: usize) -> Vec<u8> {
    words.iter().map(|&s| word_bit(s as usize, j, w as usize)).collect()
}

/// One simulated attack: fresh random keys and plaintext, Eve taps the
/// channel for `horizon` slots and runs the correlation attack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcaTrial {
    pub recovered: bool,
    /// False when no word bit leaks and the attack was refused.
    pub attempted: bool,
    pub iterations: usize,
    pub confidence: f64,
    pub agreement: f64,
    pub mean_crossover: f64,
}

fn random_nonzero(rng: &mut impl Rng, width: usize) -> Vec<u8> {
    loop {
        let v: Vec<u8> = (0..width).map(|_| rng.random_range(0..2u8)).collect();
        if v.contains(&1) {
            return v;
        }
    }
}

pub fn run_trial(cfg: &Y00Config, horizon: usize, checks: &ParityCheckSet, seed: u64) -> Result<FcaTrial> {
    let spec = s_generator(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = random_nonzero(&mut rng, cfg.prng_s.seed_width());
    let dk = random_nonzero(&mut rng, cfg.prng_dx.seed_width());
    let x: Vec<u8> = (0..horizon).map(|_| rng.random_range(0..2u8)).collect();
    let r = expand_running_key(&k, &dk, cfg, horizon)?;
    let trace = transmit(&r, &x, cfg, &mut rng)?;
    let outcomes = decide_all(&tap_and_measure(&trace, cfg, rng.random())?, &eve_regions(cfg));
    let ks = match extract_leaky_bits(&outcomes, cfg) {
        Ok(ks) => ks,
        Err(Error::NoLeakyBits(c)) => {
            return Ok(FcaTrial {
                recovered: false,
                attempted: false,
                iterations: 0,
                confidence: 0.0,
                agreement: 0.0,
                mean_crossover: c,
            })
        }
        Err(e) => return Err(e),
    };
    match correlation_attack(&ks, checks, spec) {
        Ok(out) => Ok(FcaTrial {
            recovered: out.seed == k,
            attempted: true,
            iterations: out.iterations,
            confidence: out.confidence,
            agreement: out.agreement,
            mean_crossover: ks.mean_crossover,
        }),
        Err(Error::DecodeFailure(_)) => Ok(FcaTrial {
            recovered: false,
            attempted: true,
            iterations: MAX_FLIP_ITERATIONS,
            confidence: 0.0,
            agreement: 0.0,
            mean_crossover: ks.mean_crossover,
        }),
        Err(e) => Err(e),
    }
}
