//! Y00 modulation and Bob's keyed demodulation.
//!
//! The symbol index for slot `t` is
//! `m(t) = Map[s(t)] + M·((Map[s(t)] + x(t) + Δx(t)) mod 2)`, and the
//! randomized variant replaces the base term by `Map[s(t) ⊕ d(t)]` while
//! keeping the parity term keyed by `Map[s(t)]` alone.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{decide_symbol, DecisionRegionSet, NoiseModel};
use crate::error::{invalid, Result};
use crate::prng::{chop_words, GeneratorSpec, RunningKey, DEFAULT_PERIOD_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Geometry {
    /// `α[m] = α0·exp(iπm/M)`.
    Psk,
    /// `α[m] = α0·(m+1)/(2M)` on the real axis.
    Isk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MappingKind {
    Regular,
    Irregular,
    /// A fresh permutation per slot drawn from the generator.
    Scrambled(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingTable {
    pub kind: MappingKind,
    pub table: Vec<usize>,
}

/// Bits drawn from the scramble generator per Fisher–Yates step.
const SCRAMBLE_DRAW_BITS: usize = 16;

fn is_permutation(table: &[usize]) -> bool {
    let mut seen = vec![false; table.len()];
    for &v in table {
        if v >= table.len() || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    true
}

fn bit_reverse(v: usize, bits: u32) -> usize {
    if bits == 0 {
        return 0;
    }
    v.reverse_bits() >> (usize::BITS - bits)
}

pub fn inverse_permutation(table: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; table.len()];
    for (i, &v) in table.iter().enumerate() {
        inv[v] = i;
    }
    inv
}

fn fisher_yates(m: usize, bits: &mut impl Iterator<Item = u8>) -> Vec<usize> {
    let mut p: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        let draw = bits
            .take(SCRAMBLE_DRAW_BITS)
            .fold(0usize, |acc, b| (acc << 1) | b as usize);
        p.swap(i, draw % (i + 1));
    }
    p
}

impl MappingTable {
    pub fn regular(m: usize) -> Self {
        MappingTable { kind: MappingKind::Regular, table: (0..m).collect() }
    }

    pub fn irregular(table: Vec<usize>) -> Result<Self> {
        if !is_permutation(&table) {
            return invalid("irregular mapping must be a permutation of 0..M");
        }
        Ok(MappingTable { kind: MappingKind::Irregular, table })
    }

    /// Plain bit-reversal of the `log2 M`-bit word.
    pub fn bit_reversal(m: usize) -> Self {
        let bits = m.trailing_zeros();
        MappingTable {
            kind: MappingKind::Irregular,
            table: (0..m).map(|s| bit_reverse(s, bits)).collect(),
        }
    }

    /// Bit-reversal followed by `perm`: `Map[s] = perm[bitrev(s)]`.
    pub fn bit_reversal_composed(perm: &[usize]) -> Result<Self> {
        if !is_permutation(perm) {
            return invalid("composition permutation must be a permutation of 0..M");
        }
        let rev = Self::bit_reversal(perm.len());
        Self::irregular(rev.table.iter().map(|&v| perm[v]).collect())
    }

    /// Default irregular table (version 1): bit-reversal composed with a fixed
    /// permutation drawn from a constant-keyed counter generator.
    pub fn irregular_default(m: usize) -> Self {
        let key: Vec<u8> = (0..32).map(|i| ((0x5a3c_96e1u32 >> i) & 1) as u8).collect();
        let gen = GeneratorSpec::keyed_counter(&key, 8).expect("constant key is valid");
        let perm = fisher_yates(m, &mut gen.iter());
        Self::bit_reversal_composed(&perm).expect("fisher-yates yields a permutation")
    }

    pub fn scrambled(m: usize, gen: GeneratorSpec) -> Self {
        MappingTable { kind: MappingKind::Scrambled(gen), table: (0..m).collect() }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Per-slot tables for `horizon` slots.
    pub fn schedule(&self, horizon: usize) -> MappingSchedule {
        match &self.kind {
            MappingKind::Scrambled(gen) => {
                let m = self.table.len();
                let mut bits = gen.iter();
                let tables = (0..horizon).map(|_| fisher_yates(m, &mut bits)).collect();
                MappingSchedule { tables }
            }
            _ => MappingSchedule { tables: vec![self.table.clone()] },
        }
    }
}

/// Mapping tables indexed by slot; fixed mappings hold a single table.
#[derive(Debug, Clone)]
pub struct MappingSchedule {
    tables: Vec<Vec<usize>>,
}

impl MappingSchedule {
    pub fn at(&self, t: usize) -> &[usize] {
        if self.tables.len() == 1 {
            &self.tables[0]
        } else {
            &self.tables[t]
        }
    }

    pub fn is_fixed(&self) -> bool {
        self.tables.len() == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DsrMode {
    None,
    Keyed(GeneratorSpec),
    TrueRandom,
}

/// Complete system design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Y00Config {
    pub m: usize,
    pub geometry: Geometry,
    pub mapping: MappingTable,
    pub alpha0: f64,
    pub eta: f64,
    pub noise: NoiseModel,
    pub dsr: DsrMode,
    pub prng_s: GeneratorSpec,
    pub prng_dx: GeneratorSpec,
    pub period_cap: u64,
}

impl Y00Config {
    /// PSK config with regular mapping, no DSR and default noise.
    pub fn psk(m: usize, alpha0: f64, eta: f64, prng_s: GeneratorSpec, prng_dx: GeneratorSpec) -> Self {
        Y00Config {
            m,
            geometry: Geometry::Psk,
            mapping: MappingTable::regular(m),
            alpha0,
            eta,
            noise: NoiseModel::default(),
            dsr: DsrMode::None,
            prng_s,
            prng_dx,
            period_cap: DEFAULT_PERIOD_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || !self.m.is_power_of_two() {
            return invalid(format!("M = {} must be a power of two >= 2", self.m));
        }
        if self.mapping.len() != self.m {
            return invalid(format!("mapping has {} entries, M = {}", self.mapping.len(), self.m));
        }
        if !matches!(self.mapping.kind, MappingKind::Scrambled(_)) && !is_permutation(&self.mapping.table) {
            return invalid("mapping table is not a permutation");
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return invalid("alpha0 must be positive");
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return invalid("eta must lie in [0, 1]");
        }
        self.noise.validate()
    }

    pub fn word_bits(&self) -> u32 {
        self.m.trailing_zeros()
    }

    /// Signal amplitude `α[m]` for symbol index `m ∈ [0, 2M)`.
    pub fn amplitude(&self, m: usize) -> Complex64 {
        let mm = self.m as f64;
        match self.geometry {
            Geometry::Psk => Complex64::from_polar(self.alpha0, PI * m as f64 / mm),
            Geometry::Isk => Complex64::new(self.alpha0 * (m as f64 + 1.0) / (2.0 * mm), 0.0),
        }
    }

    pub fn regions(&self) -> DecisionRegionSet {
        DecisionRegionSet::new(self)
    }
}

/// Eq. (4) symbol index for one slot.
#[inline]
pub fn symbol_index(m: usize, base: usize, parity_base: usize, x: u8, dx: u8) -> usize {
    base + m * ((parity_base + x as usize + dx as usize) & 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolRecord {
    pub t: usize,
    pub m: usize,
    pub amplitude: Complex64,
    pub x: u8,
    pub d: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SymbolTrace {
    pub records: Vec<SymbolRecord>,
}

impl SymbolTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.m).collect()
    }

    /// CSV with columns `t,m,re,im,x,d` (empty `d` without DSR).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,m,re,im,x,d\n");
        for r in &self.records {
            let d = r.d.map(|d| d.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{:.12e},{:.12e},{},{}", r.t, r.m, r.amplitude.re, r.amplitude.im, r.x, d);
        }
        out
    }
}

fn check_lengths(r: &RunningKey, x: &[u8]) -> Result<()> {
    if x.len() > r.horizon() || x.len() > r.dx.len() {
        return invalid(format!("plaintext of {} bits exceeds running key horizon {}", x.len(), r.horizon()));
    }
    if x.iter().any(|&b| b > 1) {
        return invalid("plaintext bits must be 0 or 1");
    }
    Ok(())
}

pub fn modulate(r: &RunningKey, x: &[u8], cfg: &Y00Config) -> Result<SymbolTrace> {
    if cfg.dsr != DsrMode::None {
        return invalid("modulate requires dsr = None; use modulate_dsr");
    }
    check_lengths(r, x)?;
    let schedule = cfg.mapping.schedule(x.len());
    let records = x
        .iter()
        .enumerate()
        .map(|(t, &xt)| {
            let base = schedule.at(t)[r.s[t] as usize];
            let m = symbol_index(cfg.m, base, base, xt, r.dx[t]);
            SymbolRecord { t, m, amplitude: cfg.amplitude(m), x: xt, d: None }
        })
        .collect();
    Ok(SymbolTrace { records })
}

pub fn modulate_dsr(r: &RunningKey, x: &[u8], d: &[u32], cfg: &Y00Config) -> Result<SymbolTrace> {
    check_lengths(r, x)?;
    if d.len() < x.len() {
        return invalid(format!("{} DSR words for {} slots", d.len(), x.len()));
    }
    if d.iter().any(|&w| w as usize >= cfg.m) {
        return invalid(format!("DSR word wider than log2 M = {} bits", cfg.word_bits()));
    }
    let schedule = cfg.mapping.schedule(x.len());
    let records = x
        .iter()
        .enumerate()
        .map(|(t, &xt)| {
            let table = schedule.at(t);
            let s = r.s[t] as usize;
            let base = table[s ^ d[t] as usize];
            let m = symbol_index(cfg.m, base, table[s], xt, r.dx[t]);
            SymbolRecord { t, m, amplitude: cfg.amplitude(m), x: xt, d: Some(d[t]) }
        })
        .collect();
    Ok(SymbolTrace { records })
}

/// DSR words for `horizon` slots according to `cfg.dsr`.
pub fn dsr_words(cfg: &Y00Config, horizon: usize, rng: &mut impl Rng) -> Vec<u32> {
    match &cfg.dsr {
        DsrMode::None => vec![0; horizon],
        DsrMode::Keyed(g) => chop_words(&g.stream(horizon * cfg.word_bits() as usize), cfg.word_bits()),
        DsrMode::TrueRandom => (0..horizon).map(|_| rng.random_range(0..cfg.m as u32)).collect(),
    }
}

/// Modulates with whatever DSR mode `cfg` declares.
pub fn transmit(r: &RunningKey, x: &[u8], cfg: &Y00Config, rng: &mut impl Rng) -> Result<SymbolTrace> {
    match cfg.dsr {
        DsrMode::None => modulate(r, x, cfg),
        _ => {
            let d = dsr_words(cfg, x.len(), rng);
            modulate_dsr(r, x, &d, cfg)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BobDecode {
    pub bits: Vec<u8>,
    pub errors: Option<usize>,
}

/// Bob's keyed decision per slot.
///
/// With the base known (no DSR, or keyed DSR with `d`), Bob picks the nearer
/// of `α[base]` and `α[base+M]`. Under true-random DSR only the half
/// `m < M` vs `m ≥ M` is keyed, so Bob decides the half from the region
/// partition.
pub fn demodulate_bob(
    outcomes: &[Complex64],
    r: &RunningKey,
    cfg: &Y00Config,
    keyed_dsr: Option<&[u32]>,
    truth: Option<&[u8]>,
) -> Result<BobDecode> {
    if outcomes.len() > r.horizon() || outcomes.len() > r.dx.len() {
        return invalid("running key shorter than received sequence");
    }
    let d = match (&cfg.dsr, keyed_dsr) {
        (DsrMode::Keyed(_), None) => return invalid("keyed DSR requires Bob's DSR words"),
        (DsrMode::Keyed(_), Some(d)) if d.len() < outcomes.len() => {
            return invalid("keyed DSR words shorter than received sequence")
        }
        (DsrMode::Keyed(_), Some(d)) => Some(d),
        _ => None,
    };
    let schedule = cfg.mapping.schedule(outcomes.len());
    let regions = cfg.regions();
    let bits: Vec<u8> = outcomes
        .iter()
        .enumerate()
        .map(|(t, &y)| {
            let table = schedule.at(t);
            let s = r.s[t] as usize;
            let parity_key = (table[s] + r.dx[t] as usize) & 1;
            let upper = match (&cfg.dsr, d) {
                (DsrMode::TrueRandom, _) => decide_symbol(y, &regions) >= cfg.m,
                (_, d) => {
                    let base = table[s ^ d.map(|d| d[t] as usize).unwrap_or(0)];
                    let lo = (y - cfg.amplitude(base)).norm_sqr();
                    let hi = (y - cfg.amplitude(base + cfg.m)).norm_sqr();
                    hi < lo
                }
            };
            (upper as u8) ^ parity_key as u8
        })
        .collect();
    let errors = truth.map(|x| bits.iter().zip(x).filter(|(a, b)| a != b).count());
    Ok(BobDecode { bits, errors })
}
