//! Key expansion: Fibonacci LFSRs, a keyed counter-mode generator, period
//! computation and the running key `(s, Δx)`.
//!
//! All generator output is a stream of bits (`u8` values 0/1). Words of the
//! running key are formed MSB-first: the first bit drawn from the generator
//! becomes the most significant bit of `s(t)`.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::y00::{DsrMode, Y00Config};

/// Default cycle-detection budget for period searches.
pub const DEFAULT_PERIOD_CAP: u64 = 1 << 24;

/// Fibonacci LFSR over GF(2).
///
/// `taps` are the nonzero exponents of the characteristic polynomial
/// `x^L + ... + 1` (the constant term is implicit), so `{4, 1}` is
/// `x^4 + x + 1` and the output obeys `b(t+4) = b(t+1) ^ b(t)`.
/// `seed[i]` is output bit `b(i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LfsrSpec {
    degree: usize,
    taps: Vec<usize>,
    seed: Vec<u8>,
}

impl LfsrSpec {
    pub fn new(degree: usize, taps: &[usize], seed: &[u8]) -> Result<Self> {
        if degree == 0 || degree > 64 {
            return invalid(format!("LFSR degree {degree} outside 1..=64"));
        }
        let mut taps = taps.to_vec();
        taps.sort_unstable();
        taps.dedup();
        if taps.is_empty() || *taps.last().unwrap() != degree {
            return invalid("LFSR taps must include the degree");
        }
        if taps[0] == 0 {
            return invalid("LFSR tap positions start at 1");
        }
        validate_seed(degree, seed)?;
        Ok(LfsrSpec { degree, taps, seed: seed.to_vec() })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn taps(&self) -> &[usize] {
        &self.taps
    }

    pub fn seed(&self) -> &[u8] {
        &self.seed
    }

    pub fn with_seed(&self, seed: &[u8]) -> Result<Self> {
        validate_seed(self.degree, seed)?;
        Ok(LfsrSpec { seed: seed.to_vec(), ..self.clone() })
    }

    /// Exponents of the characteristic polynomial including the constant term.
    pub fn polynomial_exponents(&self) -> Vec<usize> {
        let mut e = vec![0];
        e.extend(self.taps.iter().copied());
        e
    }

    fn feedback_mask(&self) -> u64 {
        let mut mask = 1u64;
        for &t in &self.taps {
            if t < self.degree {
                mask |= 1 << t;
            }
        }
        mask
    }

    fn initial_state(&self) -> u64 {
        self.seed
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64 & 1) << i))
    }

    pub fn iter(&self) -> Lfsr {
        Lfsr {
            state: self.initial_state(),
            mask: self.feedback_mask(),
            degree: self.degree as u32,
        }
    }
}

fn validate_seed(degree: usize, seed: &[u8]) -> Result<()> {
    if seed.len() != degree {
        return invalid(format!("seed has {} bits, LFSR degree is {degree}", seed.len()));
    }
    if seed.iter().any(|&b| b > 1) {
        return invalid("seed bits must be 0 or 1");
    }
    if seed.iter().all(|&b| b == 0) {
        return invalid("LFSR seed must be nonzero");
    }
    Ok(())
}

/// Running LFSR; yields `b(0), b(1), ...`.
#[derive(Debug, Clone)]
pub struct Lfsr {
    state: u64,
    mask: u64,
    degree: u32,
}

impl Lfsr {
    pub fn state(&self) -> u64 {
        self.state
    }

    #[inline]
    pub fn next_bit(&mut self) -> u8 {
        let out = (self.state & 1) as u8;
        let fb = (self.state & self.mask).count_ones() as u64 & 1;
        self.state = (self.state >> 1) | (fb << (self.degree - 1));
        out
    }
}

impl Iterator for Lfsr {
    type Item = u8;
    fn next(&mut self) -> Option<u8> {
        Some(self.next_bit())
    }
}

/// `n` output bits of the LFSR described by `spec`.
pub fn lfsr_stream(spec: &LfsrSpec, n: usize) -> Vec<u8> {
    spec.iter().take(n).collect()
}

/// Counter width of [`GeneratorSpec::KeyedCounter`].
pub const COUNTER_BITS: u32 = 16;

/// 16-bit ARX permutation keyed by `key` bytes. Each round is invertible.
fn arx_permute(key: &[u8], rounds: u32, block: u16) -> u16 {
    let mut x = (block >> 8) as u8;
    let mut y = block as u8;
    for r in 0..rounds {
        let k = key[r as usize % key.len()] ^ (r as u8).wrapping_mul(0x9d);
        x = x.rotate_right(3).wrapping_add(y) ^ k;
        y = y.rotate_left(2) ^ x;
    }
    ((x as u16) << 8) | y as u16
}

/// Keyed counter-mode generator: bit `t` is the MSB of the ARX permutation
/// applied to the 16-bit counter `t mod 2^16`.
#[derive(Debug, Clone)]
pub struct KeyedCounter {
    key: Vec<u8>,
    rounds: u32,
    counter: u32,
}

impl KeyedCounter {
    #[inline]
    pub fn next_bit(&mut self) -> u8 {
        let block = arx_permute(&self.key, self.rounds, self.counter as u16);
        self.counter = (self.counter + 1) & ((1 << COUNTER_BITS) - 1);
        (block >> 15) as u8
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeneratorSpec {
    Lfsr(LfsrSpec),
    /// `key` is a bit string whose length is a nonzero multiple of 8.
    KeyedCounter { key: Vec<u8>, rounds: u32 },
}

impl GeneratorSpec {
    pub fn keyed_counter(key: &[u8], rounds: u32) -> Result<Self> {
        if key.is_empty() || !key.len().is_multiple_of(8) || key.iter().any(|&b| b > 1) {
            return invalid("keyed counter key must be a nonempty multiple of 8 bits");
        }
        if rounds == 0 {
            return invalid("keyed counter needs at least one round");
        }
        Ok(GeneratorSpec::KeyedCounter { key: key.to_vec(), rounds })
    }

    /// Width of the seed (LFSR) or key (counter) in bits.
    pub fn seed_width(&self) -> usize {
        match self {
            GeneratorSpec::Lfsr(l) => l.degree,
            GeneratorSpec::KeyedCounter { key, .. } => key.len(),
        }
    }

    /// Number of distinct admissible seeds, as log2. LFSR seeds exclude zero.
    pub fn log2_seed_space(&self) -> f64 {
        match self {
            GeneratorSpec::Lfsr(l) => log2_pow2_minus_one(l.degree as u32),
            GeneratorSpec::KeyedCounter { key, .. } => key.len() as f64,
        }
    }

    pub fn seed_bits(&self) -> &[u8] {
        match self {
            GeneratorSpec::Lfsr(l) => &l.seed,
            GeneratorSpec::KeyedCounter { key, .. } => key,
        }
    }

    pub fn with_seed(&self, seed: &[u8]) -> Result<Self> {
        match self {
            GeneratorSpec::Lfsr(l) => Ok(GeneratorSpec::Lfsr(l.with_seed(seed)?)),
            GeneratorSpec::KeyedCounter { key, rounds } => {
                if seed.len() != key.len() {
                    return invalid(format!("key has {} bits, expected {}", seed.len(), key.len()));
                }
                GeneratorSpec::keyed_counter(seed, *rounds)
            }
        }
    }

    pub fn iter(&self) -> GeneratorStream {
        match self {
            GeneratorSpec::Lfsr(l) => GeneratorStream::Lfsr(l.iter()),
            GeneratorSpec::KeyedCounter { key, rounds } => {
                let bytes = key
                    .chunks(8)
                    .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | b))
                    .collect();
                GeneratorStream::Counter(KeyedCounter { key: bytes, rounds: *rounds, counter: 0 })
            }
        }
    }

    pub fn stream(&self, n: usize) -> Vec<u8> {
        self.iter().take(n).collect()
    }

    /// Period of the output bit stream. LFSRs are searched by cycle detection
    /// up to `cap` steps; the keyed counter has period `2^16` by construction.
    pub fn period(&self, cap: u64) -> Result<u64> {
        match self {
            GeneratorSpec::Lfsr(l) => {
                let mut it = l.iter();
                let start = it.state();
                for step in 1..=cap {
                    it.next_bit();
                    if it.state() == start {
                        return Ok(step);
                    }
                }
                Err(Error::PeriodUnknown { cap })
            }
            GeneratorSpec::KeyedCounter { .. } => Ok(1 << COUNTER_BITS),
        }
    }
}

/// `log2(2^n - 1)` without overflow or cancellation.
pub fn log2_pow2_minus_one(n: u32) -> f64 {
    if n == 0 {
        f64::NEG_INFINITY
    } else if n < 53 {
        (((1u64 << n) - 1) as f64).log2()
    } else {
        n as f64 + (-(2f64).powi(-(n as i32))).ln_1p() / std::f64::consts::LN_2
    }
}

pub enum GeneratorStream {
    Lfsr(Lfsr),
    Counter(KeyedCounter),
}

impl Iterator for GeneratorStream {
    type Item = u8;
    fn next(&mut self) -> Option<u8> {
        Some(match self {
            GeneratorStream::Lfsr(l) => l.next_bit(),
            GeneratorStream::Counter(c) => c.next_bit(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Periods {
    pub p1: u64,
    pub p2: u64,
    pub t_lcm: u64,
}

pub fn compute_periods(g1: &GeneratorSpec, g2: &GeneratorSpec, cap: u64) -> Result<Periods> {
    let p1 = g1.period(cap)?;
    let p2 = g2.period(cap)?;
    Ok(Periods { p1, p2, t_lcm: p1.lcm(&p2) })
}

/// Running key `r = (s, Δx)` expanded from `(k, Δk)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunningKey {
    pub s: Vec<u32>,
    pub dx: Vec<u8>,
    pub word_bits: u32,
    pub t_lcm: u64,
}

impl RunningKey {
    pub fn horizon(&self) -> usize {
        self.s.len()
    }

    /// Generator bit stream that produced `s`, recovered MSB-first.
    pub fn s_bits(&self) -> Vec<u8> {
        words_to_bits(&self.s, self.word_bits)
    }
}

/// Chops `bits` into `width`-bit words, MSB-first. Trailing bits that do not
/// fill a word are dropped.
pub fn chop_words(bits: &[u8], width: u32) -> Vec<u32> {
    bits.chunks_exact(width as usize)
        .map(|c| c.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32))
        .collect()
}

pub fn words_to_bits(words: &[u32], width: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(words.len() * width as usize);
    for &w in words {
        for i in (0..width).rev() {
            out.push(((w >> i) & 1) as u8);
        }
    }
    out
}

/// Expands `(k, dk)` through the configured generators into `horizon` slots of
/// running key. `t_lcm` covers the keyed-DSR generator too when one is set.
pub fn expand_running_key(k: &[u8], dk: &[u8], cfg: &Y00Config, horizon: usize) -> Result<RunningKey> {
    let s_gen = cfg.prng_s.with_seed(k)?;
    let dx_gen = cfg.prng_dx.with_seed(dk)?;
    let periods = compute_periods(&s_gen, &dx_gen, cfg.period_cap)?;
    let mut t_lcm = periods.t_lcm;
    if let DsrMode::Keyed(g) = &cfg.dsr {
        t_lcm = t_lcm.lcm(&g.period(cfg.period_cap)?);
    }
    let width = cfg.word_bits();
    let s = chop_words(&s_gen.stream(horizon * width as usize), width);
    let dx = dx_gen.stream(horizon);
    Ok(RunningKey { s, dx, word_bits: width, t_lcm })
}

/// Parses a hex string into exactly `width` bits, MSB-first.
pub fn bits_from_hex(hex: &str, width: usize) -> Result<Vec<u8>> {
    let hex = hex.trim().trim_start_matches("0x");
    let mut bits = Vec::with_capacity(hex.len() * 4);
    for ch in hex.chars() {
        let v = ch
            .to_digit(16)
            .ok_or_else(|| Error::InvalidInput(format!("bad hex digit {ch:?}")))?;
        for i in (0..4).rev() {
            bits.push(((v >> i) & 1) as u8);
        }
    }
    while bits.len() > width {
        if bits[0] != 0 {
            return invalid(format!("hex value {hex} does not fit in {width} bits"));
        }
        bits.remove(0);
    }
    while bits.len() < width {
        bits.insert(0, 0);
    }
    Ok(bits)
}

pub fn bits_to_hex(bits: &[u8]) -> String {
    let pad = (4 - bits.len() % 4) % 4;
    let padded: Vec<u8> = std::iter::repeat_n(0, pad).chain(bits.iter().copied()).collect();
    padded
        .chunks(4)
        .map(|c| {
            let v = c.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
            std::char::from_digit(v, 16).unwrap()
        })
        .collect()
}
