//! Breach-time analytics: the inverse breach time `1/N_Breach`, ITS
//! classification, Eve's success bound after `N` periods, and exact
//! multinomial success probabilities on tiny instances.

use std::f64::consts::LN_2;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ErrorPatternDist;
use crate::error::{invalid, Error, Result};
use crate::prng::log2_pow2_minus_one;

/// Tolerance on `1/N_Breach` below which a design counts as ideal.
pub const IDEAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ItsClass {
    NonITS,
    ITS,
    Ideal,
}

impl std::fmt::Display for ItsClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ItsClass::NonITS => "NonITS",
            ItsClass::ITS => "ITS",
            ItsClass::Ideal => "Ideal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreachTime {
    pub inv_n_breach: f64,
    pub n_breach: f64,
}

impl BreachTime {
    pub fn from_inverse(inv: f64) -> Self {
        let n_breach = if inv == f64::INFINITY {
            0.0
        } else if inv.abs() <= IDEAL_TOL {
            f64::INFINITY
        } else {
            1.0 / inv
        };
        BreachTime { inv_n_breach: inv, n_breach }
    }
}

/// `1/N_Breach = −log2[(2M)^T · min_e Pr(e)]`, summed slot by slot so that
/// uniform slots contribute exactly zero.
pub fn n_breach(dist: &ErrorPatternDist) -> BreachTime {
    let inv = -dist.log2_scaled_min();
    // the log argument never exceeds one, so negative values are roundoff
    BreachTime::from_inverse(if inv <= 0.0 { 0.0 } else { inv })
}

pub fn classify_its(inv_n_breach: f64) -> ItsClass {
    if inv_n_breach.abs() <= IDEAL_TOL {
        ItsClass::Ideal
    } else if inv_n_breach > 1.0 {
        ItsClass::NonITS
    } else {
        ItsClass::ITS
    }
}

/// `log2 Pr(r)` for a uniform key over the nonzero seeds of generators with
/// the given widths.
pub fn uniform_log2_prior(key_bits: &[u32]) -> f64 {
    -key_bits.iter().map(|&l| log2_pow2_minus_one(l)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreachParams {
    pub log2_prior: f64,
    pub inv_n_breach: f64,
    pub p_th: f64,
}

impl BreachParams {
    pub fn new(log2_prior: f64, inv_n_breach: f64, p_th: f64) -> Result<Self> {
        let p = BreachParams { log2_prior, inv_n_breach, p_th };
        p.validate()?;
        Ok(p)
    }

    pub fn from_dist(dist: &ErrorPatternDist, log2_prior: f64, p_th: f64) -> Result<Self> {
        Self::new(log2_prior, n_breach(dist).inv_n_breach, p_th)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.log2_prior < 0.0) {
            return invalid("prior must lie in (0, 1)");
        }
        if !(self.inv_n_breach >= 0.0) {
            return invalid("inverse breach time must be >= 0");
        }
        if !(self.p_th > self.prior() && self.p_th < 1.0) {
            return invalid(format!("threshold {} must lie in (Pr(r), 1)", self.p_th));
        }
        Ok(())
    }

    pub fn prior(&self) -> f64 {
        self.log2_prior.exp2()
    }

    pub fn breach_time(&self) -> BreachTime {
        BreachTime::from_inverse(self.inv_n_breach)
    }

    pub fn classification(&self) -> ItsClass {
        classify_its(self.inv_n_breach)
    }
}

/// `1 − (1 − Pr(r))·2^(−N/N_Breach)`.
pub fn success_upper_bound(params: &BreachParams, n: f64) -> f64 {
    if params.inv_n_breach == f64::INFINITY {
        return if n > 0.0 { 1.0 } else { params.prior() };
    }
    let x = -n * params.inv_n_breach * LN_2;
    // −expm1 keeps the small-N regime exact where 1 − 2^(−N/N_Breach) ≪ 1
    (-x.exp_m1() + params.prior() * x.exp()).min(1.0)
}

/// Periods until the bound reaches `P_Th`; infinite for ideal designs.
pub fn time_to_threshold(params: &BreachParams) -> f64 {
    if params.classification() == ItsClass::Ideal {
        return f64::INFINITY;
    }
    let ratio_ln = (-params.prior()).ln_1p() - (-params.p_th).ln_1p();
    ratio_ln / (LN_2 * params.inv_n_breach)
}

pub fn breach_curve(params: &BreachParams, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if grid.windows(2).any(|w| w[1] < w[0]) || grid.iter().any(|&n| !(n >= 0.0)) {
        return invalid("grid must be sorted and nonnegative");
    }
    Ok(grid.iter().map(|&n| (n, success_upper_bound(params, n))).collect())
}

pub fn curve_csv(params: &BreachParams, curve: &[(f64, f64)], exact: Option<&[f64]>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# prior=2^{:.17e}, inv_n_breach={:.17e}",
        params.log2_prior, params.inv_n_breach
    );
    out.push_str(if exact.is_some() { "N,upper_bound,exact\n" } else { "N,upper_bound\n" });
    for (i, (n, b)) in curve.iter().enumerate() {
        let _ = write!(out, "{n},{b:.17e}");
        if let Some(e) = exact {
            let _ = write!(out, ",{:.17e}", e[i]);
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreachReport {
    pub inv_n_breach: f64,
    pub n_breach: f64,
    pub classification: ItsClass,
    pub n_at_threshold: f64,
    pub curve: Vec<(f64, f64)>,
}

pub fn analyze(params: &BreachParams, grid: &[f64]) -> Result<BreachReport> {
    params.validate()?;
    let bt = params.breach_time();
    Ok(BreachReport {
        inv_n_breach: bt.inv_n_breach,
        n_breach: bt.n_breach,
        classification: params.classification(),
        n_at_threshold: time_to_threshold(params),
        curve: breach_curve(params, grid)?,
    })
}

/// Prior-weighted average of per-key success probabilities.
pub fn average_success(per_key: &[f64], prior: &[f64]) -> Result<f64> {
    if per_key.len() != prior.len() {
        return invalid("per-key table and prior differ in length");
    }
    let total: f64 = prior.iter().sum();
    if (total - 1.0).abs() > 1e-9 || prior.iter().any(|&p| p < 0.0) {
        return invalid(format!("prior sums to {total}"));
    }
    Ok(per_key.iter().zip(prior).map(|(s, p)| s * p).sum())
}

/// Largest pattern space handled by exact enumeration.
pub const EXACT_MAX_PATTERN_BITS: u64 = 12;
/// Largest period count handled by exact enumeration.
pub const EXACT_MAX_PERIODS: u32 = 8;
/// Largest number of count vectors enumerated.
pub const COUNT_VECTOR_CAP: u64 = 4_000_000;

/// `C(n + k − 1, k − 1)`: number of count vectors over `k` patterns summing to `n`.
pub fn count_vector_total(patterns: u64, n: u32) -> Option<u64> {
    let mut c: u128 = 1;
    for i in 1..=n as u128 {
        c = c * (patterns as u128 + i - 1) / i;
        if c > u64::MAX as u128 {
            return None;
        }
    }
    Some(c as u64)
}

fn check_feasible(dist: &ErrorPatternDist, n: u32) -> Result<usize> {
    let bits = dist.pattern_len();
    if bits > EXACT_MAX_PATTERN_BITS || n > EXACT_MAX_PERIODS {
        return Err(Error::Infeasible(format!(
            "exact success needs |e| <= {EXACT_MAX_PATTERN_BITS} bits and N <= {EXACT_MAX_PERIODS} (got {bits}, {n})"
        )));
    }
    let patterns = 1u64 << bits;
    match count_vector_total(patterns, n) {
        Some(c) if c <= COUNT_VECTOR_CAP => Ok(patterns as usize),
        _ => Err(Error::Infeasible(format!(
            "{patterns} patterns over {n} periods exceed {COUNT_VECTOR_CAP} count vectors"
        ))),
    }
}

/// Calls `f` on every count vector of length `k` summing to `n` whose first
/// entry is `first`, in lexicographic order.
fn for_each_counts_with_first(k: usize, n: u32, first: u32, f: &mut impl FnMut(&[u32])) {
    fn rec(buf: &mut Vec<u32>, pos: usize, left: u32, f: &mut impl FnMut(&[u32])) {
        if pos == buf.len() - 1 {
            buf[pos] = left;
            f(buf);
            return;
        }
        for c in (0..=left).rev() {
            buf[pos] = c;
            rec(buf, pos + 1, left - c, f);
        }
    }
    let mut buf = vec![0u32; k];
    buf[0] = first;
    if k == 1 {
        if first == n {
            f(&buf);
        }
        return;
    }
    rec(&mut buf, 1, n - first, f);
}

fn ln_factorials(n: u32) -> Vec<f64> {
    let mut v = vec![0.0; n as usize + 1];
    for i in 1..=n as usize {
        v[i] = v[i - 1] + (i as f64).ln();
    }
    v
}

fn multinomial_term(counts: &[u32], n: u32, ln_probs: &[f64], ln_fact: &[f64]) -> f64 {
    let mut s = ln_fact[n as usize];
    for (&c, &lp) in counts.iter().zip(ln_probs) {
        if c > 0 {
            if lp == f64::NEG_INFINITY {
                return 0.0;
            }
            s += c as f64 * lp - ln_fact[c as usize];
        }
    }
    s.exp()
}

/// `Σ_{counts ∈ Ω} N!·Π n(e)!⁻¹·Π Pr(e)^{n(e)}` in double precision with
/// compensated summation.
pub fn success_exact_small(
    dist: &ErrorPatternDist,
    n: u32,
    omega: &(impl Fn(&[u32]) -> bool + Sync),
) -> Result<f64> {
    let k = check_feasible(dist, n)?;
    let probs = dist.dense()?;
    let ln_probs: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
    let ln_fact = ln_factorials(n);
    // partition on the first count; partial sums are reduced in index order
    let partial: Vec<(f64, f64)> = (0..=n)
        .into_par_iter()
        .map(|first| {
            let (mut sum, mut comp) = (0.0f64, 0.0f64);
            for_each_counts_with_first(k, n, first, &mut |c| {
                if omega(c) {
                    let term = multinomial_term(c, n, &ln_probs, &ln_fact);
                    let t = sum + term;
                    comp += if sum.abs() >= term.abs() { (sum - t) + term } else { (term - t) + sum };
                    sum = t;
                }
            });
            (sum, comp)
        })
        .collect();
    let (s, c) = partial.iter().fold((0.0, 0.0), |(s, c), (ps, pc)| (s + ps, c + pc));
    Ok(s + c)
}

/// Exact rational version of [`success_exact_small`]. Every `f64` is a
/// dyadic rational, so the result is exact for the given probabilities.
pub fn success_exact_rational(
    dist: &ErrorPatternDist,
    n: u32,
    omega: &(impl Fn(&[u32]) -> bool + Sync),
) -> Result<BigRational> {
    let k = check_feasible(dist, n)?;
    let probs: Vec<BigRational> = dist
        .dense()?
        .iter()
        .map(|&p| BigRational::from_float(p).expect("finite probability"))
        .collect();
    let fact: Vec<BigInt> = (0..=n).scan(BigInt::one(), |acc, i| {
        if i > 0 {
            *acc *= BigInt::from(i);
        }
        Some(acc.clone())
    })
    .collect();
    let powers: Vec<Vec<BigRational>> = probs
        .iter()
        .map(|p| (0..=n).scan(BigRational::one(), |acc, i| {
            if i > 0 {
                *acc *= p;
            }
            Some(acc.clone())
        })
        .collect())
        .collect();
    let partial: Vec<BigRational> = (0..=n)
        .into_par_iter()
        .map(|first| {
            let mut sum = BigRational::zero();
            for_each_counts_with_first(k, n, first, &mut |c| {
                if omega(c) {
                    let mut coef = fact[n as usize].clone();
                    let mut term = BigRational::one();
                    for (e, &ce) in c.iter().enumerate() {
                        if ce > 0 {
                            coef /= &fact[ce as usize];
                            term *= &powers[e][ce as usize];
                        }
                    }
                    sum += term * BigRational::from_integer(coef);
                }
            });
            sum
        })
        .collect();
    Ok(partial.into_iter().fold(BigRational::zero(), |a, b| a + b))
}

/// `Σ_counts N!/Π n(e)!`, which must equal `(#patterns)^N`.
pub fn multinomial_count_sum(patterns: usize, n: u32) -> BigInt {
    let fact: Vec<BigInt> = (0..=n).scan(BigInt::one(), |acc, i| {
        if i > 0 {
            *acc *= BigInt::from(i);
        }
        Some(acc.clone())
    })
    .collect();
    let mut total = BigInt::zero();
    for first in 0..=n {
        for_each_counts_with_first(patterns, n, first, &mut |c| {
            let mut coef = fact[n as usize].clone();
            for &ce in c {
                coef /= &fact[ce as usize];
            }
            total += coef;
        });
    }
    total
}

/// Relative gap below which two log-likelihoods count as a tie.
pub const ML_TIE_TOL: f64 = 1e-9;

fn strictly_below(other: f64, own: f64) -> bool {
    other < own - ML_TIE_TOL * own.abs().max(1.0)
}

/// A tiny key-recovery game. Each key hypothesis fixes the reference symbol
/// of every slot; Eve observes `reference(r) + e` per period with the pattern
/// `e` drawn from `dist`, and decides by maximum likelihood over the
/// hypotheses.
#[derive(Debug, Clone)]
pub struct TinyInstance {
    pub dist: ErrorPatternDist,
    /// `references[j][t]`: reference symbol of slot `t` under key `j`.
    pub references: Vec<Vec<usize>>,
}

impl TinyInstance {
    pub fn new(dist: ErrorPatternDist, references: Vec<Vec<usize>>) -> Result<Self> {
        let t = dist.t_lcm as usize;
        let cells = 2 * dist.m;
        if dist.slot_laws().is_none() {
            return invalid("tiny instance needs per-slot laws");
        }
        if references.len() < 2 {
            return invalid("need at least two key hypotheses");
        }
        if references.iter().any(|r| r.len() != t || r.iter().any(|&s| s >= cells)) {
            return invalid("reference sequences must have one symbol per slot");
        }
        Ok(TinyInstance { dist, references })
    }

    pub fn keys(&self) -> usize {
        self.references.len()
    }

    fn cells(&self) -> usize {
        2 * self.dist.m
    }

    fn slots(&self) -> usize {
        self.dist.t_lcm as usize
    }

    /// Pattern index of the offset sequence per slot, slot 0 most significant.
    fn encode(&self, offsets: &[usize]) -> usize {
        offsets.iter().fold(0, |acc, &d| acc * self.cells() + d)
    }

    fn decode(&self, mut e: usize) -> Vec<usize> {
        let mut v = vec![0; self.slots()];
        for t in (0..self.slots()).rev() {
            v[t] = e % self.cells();
            e /= self.cells();
        }
        v
    }

    /// `shift[j][e]`: the pattern hypothesis `j` attributes to the
    /// observation produced by pattern `e` under key `truth`.
    fn shifts(&self, truth: usize) -> Vec<Vec<usize>> {
        let cells = self.cells();
        let patterns = cells.pow(self.slots() as u32);
        self.references
            .iter()
            .map(|hyp| {
                (0..patterns)
                    .map(|e| {
                        let d = self.decode(e);
                        let rel: Vec<usize> = (0..self.slots())
                            .map(|t| (self.references[truth][t] + d[t] + cells - hyp[t]) % cells)
                            .collect();
                        self.encode(&rel)
                    })
                    .collect()
            })
            .collect()
    }

    /// Ω(r|x) under maximum likelihood: the count vectors for which key
    /// `truth` has strictly the largest likelihood. Ties count against Eve;
    /// log-likelihoods within `ML_TIE_TOL` (relative) are ties, since the
    /// pattern laws carry floating-point error and symmetric cells that are
    /// equal in exact arithmetic differ in the last bits.
    pub fn ml_omega(&self, truth: usize) -> Result<impl Fn(&[u32]) -> bool + Sync> {
        let probs = self.dist.dense()?;
        let shifts = self.shifts(truth);
        let ln: Vec<f64> = probs.iter().map(|p| p.ln()).collect();
        Ok(move |counts: &[u32]| {
            let ll = |j: usize| -> f64 {
                counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(e, &c)| {
                        let l = ln[shifts[j][e]];
                        if l == f64::NEG_INFINITY { f64::NEG_INFINITY } else { c as f64 * l }
                    })
                    .sum()
            };
            let own = ll(truth);
            own > f64::NEG_INFINITY && (0..shifts.len()).all(|j| j == truth || strictly_below(ll(j), own))
        })
    }

    /// Exact success probability of the ML decision for key `truth`.
    pub fn exact_success(&self, truth: usize, n: u32) -> Result<f64> {
        success_exact_small(&self.dist, n, &self.ml_omega(truth)?)
    }

    /// Simulates `trials` runs of `n` periods: draws per-slot offsets,
    /// forms the observed symbols and picks the likeliest hypothesis from the
    /// per-slot laws directly. Returns the fraction of strict wins for `truth`.
    pub fn monte_carlo_success(&self, truth: usize, n: u32, trials: u64, seed: u64) -> f64 {
        let laws: Vec<Vec<f64>> = self.dist.slot_laws().unwrap().iter().map(|l| l.to_vec()).collect();
        let cdfs: Vec<Vec<f64>> = laws
            .iter()
            .map(|l| l.iter().scan(0.0, |a, &p| { *a += p; Some(*a) }).collect())
            .collect();
        let cells = self.cells();
        let slots = self.slots();
        const CHUNK: u64 = 1 << 14;
        let chunks = trials.div_ceil(CHUNK);
        let wins: u64 = (0..chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(chunk);
                let todo = CHUNK.min(trials - chunk * CHUNK);
                let mut wins = 0u64;
                let mut obs = vec![0usize; slots * n as usize];
                for _ in 0..todo {
                    for (i, o) in obs.iter_mut().enumerate() {
                        let t = i % slots;
                        let u: f64 = rng.random();
                        let d = cdfs[t].partition_point(|&c| c <= u).min(cells - 1);
                        *o = (self.references[truth][t] + d) % cells;
                    }
                    let lik = |j: usize| -> f64 {
                        obs.iter()
                            .enumerate()
                            .map(|(i, &y)| {
                                let t = i % slots;
                                laws[t][(y + cells - self.references[j][t]) % cells].ln()
                            })
                            .sum()
                    };
                    let own = lik(truth);
                    if own > f64::NEG_INFINITY && (0..self.keys()).all(|j| j == truth || strictly_below(lik(j), own)) {
                        wins += 1;
                    }
                }
                wins
            })
            .sum();
        wins as f64 / trials as f64
    }
}

/// Converts an exact rational to the nearest `f64`.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(inv: f64) -> BreachParams {
        BreachParams::new(uniform_log2_prior(&[256, 256]), inv, 0.5).unwrap()
    }

    #[test]
    fn inverse_breach_examples() {
        let u = ErrorPatternDist::uniform(2, 1);
        let bt = n_breach(&u);
        assert_eq!(bt.inv_n_breach, 0.0);
        assert_eq!(bt.n_breach, f64::INFINITY);
        assert_eq!(classify_its(bt.inv_n_breach), ItsClass::Ideal);

        let half = ErrorPatternDist::from_slots(2, vec![vec![0.125, 0.375, 0.25, 0.25]]).unwrap();
        let bt = n_breach(&half);
        assert!((bt.inv_n_breach - 1.0).abs() < 1e-15);
        assert_eq!(classify_its(1.0), ItsClass::ITS);

        let skew = ErrorPatternDist::from_slots(2, vec![vec![0.01, 0.49, 0.25, 0.25]]).unwrap();
        let bt = n_breach(&skew);
        // −log2(0.04) = 2 log2 5 = 4.643856189774724
        assert!((bt.inv_n_breach - 4.643_856_189_774_724).abs() < 1e-14);
        assert!((bt.n_breach - 0.215_338_279_036_696_8).abs() < 1e-14);
        assert_eq!(classify_its(bt.inv_n_breach), ItsClass::NonITS);

        let dead = ErrorPatternDist::from_slots(2, vec![vec![0.0, 0.5, 0.25, 0.25]]).unwrap();
        let bt = n_breach(&dead);
        assert_eq!(bt.inv_n_breach, f64::INFINITY);
        assert_eq!(bt.n_breach, 0.0);
    }

    #[test]
    fn bound_endpoints_at_512_bit_prior() {
        let p = params(1.0 - 2f64.powi(-13));
        assert_eq!(success_upper_bound(&p, 0.0), p.prior());
        assert!((p.log2_prior + 512.0).abs() < 1e-12);
        assert!(success_upper_bound(&p, 1e6) == 1.0);
        let b = success_upper_bound(&p, 10.0);
        let expected = 1.0 - (-10.0 * (1.0 - 2f64.powi(-13))).exp2();
        assert!((b - expected).abs() < 1e-15);
        assert!((b - 0.99902).abs() < 1e-5);
    }

    #[test]
    fn bound_at_tiny_n_keeps_relative_precision() {
        let p = BreachParams::new(-512.0, 1.0, 0.5).unwrap();
        let n = 1e-200;
        let expected = p.prior() + n * LN_2; // first-order expansion
        assert!((success_upper_bound(&p, n) - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn threshold_inversion() {
        let p = BreachParams::new(-512.0, 0.25, 0.5).unwrap();
        assert!((time_to_threshold(&p) - 4.0).abs() < 1e-12);
        let p = BreachParams::new(-512.0, 0.25, 0.75).unwrap();
        assert!((time_to_threshold(&p) - 8.0).abs() < 1e-12);
        let p = BreachParams::new(-512.0, 1.0 - 2f64.powi(-26), 1.0 - 2f64.powi(-20)).unwrap();
        let n = time_to_threshold(&p);
        assert!((n * p.inv_n_breach - 20.0).abs() < 1e-9);
        assert!((success_upper_bound(&p, n) - p.p_th).abs() < 1e-9);
        let ideal = BreachParams::new(-10.0, 0.0, 0.5).unwrap();
        assert_eq!(time_to_threshold(&ideal), f64::INFINITY);
    }

    #[test]
    fn average_success_examples() {
        assert_eq!(average_success(&[1.0, 1.0], &[0.5, 0.5]).unwrap(), 1.0);
        assert!((average_success(&[0.6, 0.8], &[0.5, 0.5]).unwrap() - 0.7).abs() < 1e-15);
        assert!(average_success(&[0.6], &[0.7]).is_err());
    }

    #[test]
    fn curve_is_monotone_and_starts_at_prior() {
        let p = params(0.3);
        let grid: Vec<f64> = (0..200).map(|i| i as f64 * 0.5).collect();
        let c = breach_curve(&p, &grid).unwrap();
        assert_eq!(c[0].1, p.prior());
        assert!(c.windows(2).all(|w| w[0].1 <= w[1].1));
        assert!(breach_curve(&p, &[2.0, 1.0]).is_err());
        let csv = curve_csv(&p, &c[..2], None);
        assert!(csv.starts_with("# prior=2^"));
        assert!(csv.lines().nth(1) == Some("N,upper_bound"));
    }

    #[test]
    fn multinomial_identity() {
        for k in [1usize, 2, 4, 16] {
            for n in 0..=8u32 {
                assert_eq!(multinomial_count_sum(k, n), BigInt::from(k).pow(n));
                assert_eq!(count_vector_total(k as u64, n).unwrap() as u128, {
                    let mut c = 0u128;
                    for first in 0..=n {
                        for_each_counts_with_first(k, n, first, &mut |_| c += 1);
                    }
                    c
                });
            }
        }
    }

    fn small_dist() -> ErrorPatternDist {
        ErrorPatternDist::from_slots(2, vec![vec![0.5, 0.25, 0.125, 0.125], vec![0.25; 4]]).unwrap()
    }

    #[test]
    fn omega_all_and_single_term() {
        let d = small_dist();
        let all = success_exact_rational(&d, 4, &|_: &[u32]| true).unwrap();
        assert_eq!(all, BigRational::one());
        let f = success_exact_small(&d, 4, &|_: &[u32]| true).unwrap();
        assert!((f - 1.0).abs() < 1e-15);
        let zero_only = success_exact_small(&d, 4, &|c: &[u32]| c[0] == 4).unwrap();
        assert!((zero_only - (0.5f64 * 0.25).powi(4)).abs() < 1e-18);
    }

    #[test]
    fn infeasible_sizes_refused() {
        let d = ErrorPatternDist::from_slots(8, vec![vec![1.0 / 16.0; 16]; 4]).unwrap();
        assert!(matches!(success_exact_small(&d, 2, &|_: &[u32]| true), Err(Error::Infeasible(_))));
        assert!(matches!(success_exact_small(&small_dist(), 9, &|_: &[u32]| true), Err(Error::Infeasible(_))));
    }

    #[test]
    fn ml_exact_matches_monte_carlo_and_stays_below_bound() {
        let d = ErrorPatternDist::from_slots(2, vec![vec![0.55, 0.2, 0.15, 0.1]]).unwrap();
        let inst = TinyInstance::new(d.clone(), vec![vec![0], vec![1], vec![3]]).unwrap();
        let n = 3;
        let exact = inst.exact_success(0, n).unwrap();
        let trials = 200_000;
        let mc = inst.monte_carlo_success(0, n, trials, 7);
        let sd = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!((exact - mc).abs() <= 3.0 * sd, "{exact} vs {mc}");
        let p = BreachParams::from_dist(&d, -(3f64.log2()), 0.9).unwrap();
        assert!(exact <= success_upper_bound(&p, n as f64) + 1e-12);
    }

    #[test]
    fn uniform_law_gives_eve_nothing() {
        let d = ErrorPatternDist::from_slots(2, vec![vec![0.25; 4]]).unwrap();
        let inst = TinyInstance::new(d, vec![vec![0], vec![2]]).unwrap();
        assert_eq!(inst.exact_success(0, 5).unwrap(), 0.0);
    }

    #[test]
    fn last_bit_asymmetry_is_a_tie() {
        // cells 1 and 3 are equal up to one ulp
        let law = [0.4, 0.25, 0.1, 0.25 * (1.0 + f64::EPSILON)];
        let total: f64 = law.iter().sum();
        let law: Vec<f64> = law.iter().map(|p| p / total).collect();
        let d = ErrorPatternDist::from_slots(2, vec![law.clone()]).unwrap();
        let refs = vec![vec![0], vec![2]];
        let inst = TinyInstance::new(d, refs).unwrap();
        // brute force over both observations; ties lose
        let mut brute = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let ll = |r: usize| law[(a + 4 - r) % 4].ln() + law[(b + 4 - r) % 4].ln();
                if ll(2) < ll(0) - 1e-9 {
                    brute += law[a] * law[b];
                }
            }
        }
        assert!((inst.exact_success(0, 2).unwrap() - brute).abs() < 1e-15);
    }
}
