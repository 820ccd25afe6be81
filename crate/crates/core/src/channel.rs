//! Eve's physical layer: beam-splitter tap, Gaussian outcome sampling,
//! decision-region quantization and the induced error-pattern distributions.
//!
//! Outcomes are complex numbers in the amplitude plane. A tapped coherent
//! state `|ηα⟩` yields an outcome with mean `ηα` and per-quadrature variance
//! `(1+ξ)/2` plus `1/2` for the heterodyne vacuum penalty (the default
//! convention). The `Husimi` convention drops the penalty, which is the exact
//! outcome law of the coherent-state POVM `π⁻¹|α⟩⟨α|d²α`.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{invalid, Error, Result};
use crate::prng::RunningKey;
use crate::y00::{DsrMode, Geometry, MappingKind, SymbolTrace, Y00Config};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum NoiseConvention {
    #[default]
    Heterodyne,
    Husimi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub xi: f64,
    pub convention: NoiseConvention,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { xi: 0.0, convention: NoiseConvention::Heterodyne }
    }
}

impl NoiseModel {
    pub fn husimi() -> Self {
        NoiseModel { xi: 0.0, convention: NoiseConvention::Husimi }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return invalid("excess noise xi must be >= 0");
        }
        Ok(())
    }

    pub fn per_quadrature_variance(&self) -> f64 {
        let base = (1.0 + self.xi) / 2.0;
        match self.convention {
            NoiseConvention::Heterodyne => base + 0.5,
            NoiseConvention::Husimi => base,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.per_quadrature_variance().sqrt()
    }
}

/// Partition of the outcome plane into `2M` cells, one per symbol index.
#[derive(Debug, Clone, PartialEq)]
pub enum DecisionRegionSet {
    /// Cell `m` covers phases `[π(m − ½)/M, π(m + ½)/M)`.
    Psk { m: usize },
    /// Cell `m` covers real parts in `(thresholds[m−1], thresholds[m]]`.
    Isk { m: usize, thresholds: Vec<f64> },
}

impl DecisionRegionSet {
    /// Regions for Bob's unattenuated signal set.
    pub fn new(cfg: &Y00Config) -> Self {
        Self::scaled(cfg, 1.0)
    }

    /// Regions matched to the signal set scaled by `gain`.
    pub fn scaled(cfg: &Y00Config, gain: f64) -> Self {
        match cfg.geometry {
            Geometry::Psk => DecisionRegionSet::Psk { m: cfg.m },
            Geometry::Isk => {
                let thresholds = (0..2 * cfg.m - 1)
                    .map(|k| gain * 0.5 * (cfg.amplitude(k).re + cfg.amplitude(k + 1).re))
                    .collect();
                DecisionRegionSet::Isk { m: cfg.m, thresholds }
            }
        }
    }

    pub fn cells(&self) -> usize {
        match self {
            DecisionRegionSet::Psk { m } | DecisionRegionSet::Isk { m, .. } => 2 * m,
        }
    }
}

/// Regions Eve uses on her tapped copy.
pub fn eve_regions(cfg: &Y00Config) -> DecisionRegionSet {
    DecisionRegionSet::scaled(cfg, cfg.eta)
}

/// Index of the cell containing `y`. Boundary points go to the lower index.
pub fn decide_symbol(y: Complex64, regions: &DecisionRegionSet) -> usize {
    match regions {
        DecisionRegionSet::Psk { m } => {
            let cells = 2 * m;
            let mut theta = y.im.atan2(y.re);
            if theta < 0.0 {
                theta += 2.0 * PI;
            }
            // u is the phase in sector units shifted so that cell c is [c, c+1)
            let u = theta * *m as f64 / PI + 0.5;
            let f = u.floor();
            let mut c = f as usize % cells;
            if u == f && c != 0 {
                c -= 1;
            }
            c
        }
        DecisionRegionSet::Isk { thresholds, .. } => thresholds.partition_point(|&th| th < y.re),
    }
}

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

const SAMPLE_BLOCK: usize = 4096;

/// Samples receiver outcomes with mean `gain·α[m(t)]`. Each block of
/// 4096 slots draws from its own ChaCha stream keyed by `(seed, block)`, so
/// the result does not depend on thread scheduling.
pub fn sample_outcomes(trace: &SymbolTrace, gain: f64, noise: &NoiseModel, seed: u64) -> Vec<Complex64> {
    let normal = Normal::new(0.0, noise.sigma()).expect("positive variance");
    trace
        .records
        .par_chunks(SAMPLE_BLOCK)
        .enumerate()
        .flat_map_iter(|(block, chunk)| {
            let mut rng = block_rng(seed, block as u64);
            chunk
                .iter()
                .map(|rec| {
                    let re = normal.sample(&mut rng);
                    let im = normal.sample(&mut rng);
                    rec.amplitude * gain + Complex64::new(re, im)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Eve's tapped heterodyne outcomes.
pub fn tap_and_measure(trace: &SymbolTrace, cfg: &Y00Config, seed: u64) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    Ok(sample_outcomes(trace, cfg.eta, &cfg.noise, seed))
}

/// Bob's outcomes: the unattenuated signal under the same noise model.
pub fn bob_receive(trace: &SymbolTrace, cfg: &Y00Config, seed: u64) -> Vec<Complex64> {
    sample_outcomes(trace, 1.0, &cfg.noise, seed)
}

pub fn decide_all(outcomes: &[Complex64], regions: &DecisionRegionSet) -> Vec<usize> {
    outcomes.iter().map(|&y| decide_symbol(y, regions)).collect()
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Gaussian tail `Q(z) = Pr[N(0,1) > z]`.
pub fn q_function(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// Phase density of a complex Gaussian with real mean `mu ≥ 0` and
/// per-quadrature standard deviation `sigma`.
fn phase_density(theta: f64, rho: f64) -> f64 {
    let c = theta.cos();
    let s = theta.sin();
    let uniform = (-0.5 * rho * rho).exp() / (2.0 * PI);
    if rho == 0.0 {
        return uniform;
    }
    uniform + rho * c / (2.0 * PI).sqrt() * (-0.5 * rho * rho * s * s).exp() * std_normal_cdf(rho * c)
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WK[7] * fc;
    let mut g = GK_WG[3] * fc;
    for i in 0..7 {
        let dx = h * GK_X[i];
        let s = f(c - dx) + f(c + dx);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) to absolute tolerance `tol`.
pub fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
        let (v, err) = gauss_kronrod(f, a, b);
        // the floor stops refinement once the estimate is at roundoff level
        if err <= tol.max(64.0 * f64::EPSILON * v.abs()) || (b - a).abs() < 1e-15 {
            return Ok(v);
        }
        if depth == 0 {
            return Err(Error::Quadrature(format!("interval [{a}, {b}] error {err:e} > {tol:e}")));
        }
        let m = 0.5 * (a + b);
        Ok(rec(f, a, m, 0.5 * tol, depth - 1)? + rec(f, m, b, 0.5 * tol, depth - 1)?)
    }
    rec(f, a, b, tol, 40)
}

/// Absolute quadrature tolerance for cell probabilities.
pub const QUAD_TOL: f64 = 1e-12;

/// Probability of each of the `2M` cells for an outcome with the given mean.
pub fn cell_probabilities(mean: Complex64, noise: &NoiseModel, regions: &DecisionRegionSet) -> Result<Vec<f64>> {
    let sigma = noise.sigma();
    match regions {
        DecisionRegionSet::Psk { m } => {
            if mean.norm() == 0.0 {
                // isotropic noise: the cells are congruent
                return Ok(vec![1.0 / (2 * m) as f64; 2 * m]);
            }
            let rho = mean.norm() / sigma;
            let phi = if mean.norm() == 0.0 { 0.0 } else { mean.im.atan2(mean.re) };
            let w = PI / *m as f64;
            let f = |th: f64| phase_density(th, rho);
            (0..2 * m)
                .map(|c| {
                    let lo = (c as f64 - 0.5) * w - phi;
                    integrate(&f, lo, lo + w, QUAD_TOL / (2 * m) as f64)
                })
                .collect()
        }
        DecisionRegionSet::Isk { thresholds, .. } => {
            let cdf = |x: f64| std_normal_cdf((x - mean.re) / sigma);
            let upper = |x: f64| q_function((x - mean.re) / sigma);
            let n = thresholds.len() + 1;
            Ok((0..n)
                .map(|c| {
                    if c == 0 {
                        cdf(thresholds[0])
                    } else if c == n - 1 {
                        upper(thresholds[n - 2])
                    } else {
                        // use whichever tail keeps the difference well conditioned
                        let (a, b) = (thresholds[c - 1], thresholds[c]);
                        if a > mean.re {
                            upper(a) - upper(b)
                        } else {
                            cdf(b) - cdf(a)
                        }
                    }
                })
                .collect())
        }
    }
}

/// `Pr(detected = m + δ mod 2M | true m)` for Eve, indexed by `δ ∈ [0, 2M)`.
pub fn symbol_error_dist(true_m: usize, cfg: &Y00Config) -> Result<Vec<f64>> {
    let regions = eve_regions(cfg);
    let cells = cell_probabilities(cfg.amplitude(true_m) * cfg.eta, &cfg.noise, &regions)?;
    let n = cells.len();
    Ok((0..n).map(|d| cells[(true_m + d) % n]).collect())
}

/// Probability table for one class of slots sharing the same offset law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotClass {
    pub count: u64,
    pub probs: Vec<f64>,
}

impl SlotClass {
    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Cap on dense pattern tables, in pattern bits.
pub const DENSE_PATTERN_BITS: u32 = 24;
/// Cap on slots enumerated when the slot law depends on the running key.
pub const SLOT_ENUMERATION_CAP: u64 = 1 << 24;

/// Distribution of Eve's per-period error pattern `e`.
///
/// The pattern is the offset sequence `δ(t) = detected − reference mod 2M`,
/// serialized slot 0 first, each offset as `log2(2M)` bits MSB-first.
/// Slots are independent, so the law is a product over slots; slots with
/// identical per-slot laws are grouped into classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPatternDist {
    pub m: usize,
    pub t_lcm: u64,
    pub classes: Vec<SlotClass>,
    /// Per-slot class index, kept when the table is small enough to be dense.
    pub slot_order: Option<Vec<usize>>,
}

impl ErrorPatternDist {
    /// Builds a distribution from explicit per-slot offset laws.
    pub fn from_slots(m: usize, slots: Vec<Vec<f64>>) -> Result<Self> {
        for s in &slots {
            if s.len() != 2 * m {
                return invalid(format!("slot law has {} entries, expected {}", s.len(), 2 * m));
            }
            let total: f64 = s.iter().sum();
            if (total - 1.0).abs() > 1e-10 || s.iter().any(|&p| p < 0.0) {
                return invalid(format!("slot law sums to {total}"));
            }
        }
        let t = slots.len() as u64;
        let order = (0..slots.len()).collect();
        let classes = slots.into_iter().map(|probs| SlotClass { count: 1, probs }).collect();
        Ok(ErrorPatternDist { m, t_lcm: t, classes, slot_order: Some(order) })
    }

    /// Uniform law over all patterns.
    pub fn uniform(m: usize, t_lcm: u64) -> Self {
        ErrorPatternDist {
            m,
            t_lcm,
            classes: vec![SlotClass { count: t_lcm, probs: vec![1.0 / (2 * m) as f64; 2 * m] }],
            slot_order: None,
        }
    }

    pub fn bits_per_slot(&self) -> u32 {
        (2 * self.m).trailing_zeros()
    }

    /// `|e| = T_LCM · log2(2M)`.
    pub fn pattern_len(&self) -> u64 {
        self.t_lcm * self.bits_per_slot() as u64
    }

    /// `Σ_t log2(2M · min_δ Pr_t(δ))`, which is `≤ 0`; the negated value is
    /// the inverse breach time.
    pub fn log2_scaled_min(&self) -> f64 {
        let two_m = (2 * self.m) as f64;
        self.classes
            .iter()
            .map(|c| {
                let v = (two_m * c.min_prob()).log2();
                if v == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    c.count as f64 * v
                }
            })
            .sum()
    }

    /// `log2 min_e Pr(e)`.
    pub fn log2_min_prob(&self) -> f64 {
        self.classes.iter().map(|c| c.count as f64 * c.min_prob().log2()).sum()
    }

    /// `min_e Pr(e)`; underflows to zero for long periods, use the log form.
    pub fn min_prob(&self) -> f64 {
        self.log2_min_prob().exp2()
    }

    pub fn dense_feasible(&self) -> bool {
        self.slot_order.is_some() && self.pattern_len() <= DENSE_PATTERN_BITS as u64
    }

    /// Per-slot laws in slot order, when retained.
    pub fn slot_laws(&self) -> Option<Vec<&[f64]>> {
        self.slot_order
            .as_ref()
            .map(|o| o.iter().map(|&c| self.classes[c].probs.as_slice()).collect())
    }

    /// Dense table indexed by the pattern integer.
    pub fn dense(&self) -> Result<Vec<f64>> {
        if !self.dense_feasible() {
            return Err(Error::Infeasible(format!(
                "dense table needs {} pattern bits (cap {DENSE_PATTERN_BITS})",
                self.pattern_len()
            )));
        }
        let laws = self.slot_laws().unwrap();
        let mut table = vec![1.0];
        for law in laws {
            let mut next = Vec::with_capacity(table.len() * law.len());
            for &p in &table {
                for &q in law {
                    next.push(p * q);
                }
            }
            table = next;
        }
        Ok(table)
    }

    pub fn total_probability(&self) -> f64 {
        self.classes
            .iter()
            .map(|c| c.probs.iter().sum::<f64>().powf(c.count as f64))
            .product()
    }

    /// CSV with columns `pattern,probability` (dense) or
    /// `class,count,offset,probability` (product form).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Ok(table) = self.dense() {
            let hex_digits = (self.pattern_len() as usize).div_ceil(4).max(1);
            out.push_str("pattern,probability\n");
            for (e, p) in table.iter().enumerate() {
                let _ = writeln!(out, "{e:0hex_digits$x},{p:.17e}");
            }
        } else {
            out.push_str("class,count,offset,probability\n");
            for (i, c) in self.classes.iter().enumerate() {
                for (d, p) in c.probs.iter().enumerate() {
                    let _ = writeln!(out, "{i},{},{d},{p:.17e}", c.count);
                }
            }
        }
        out
    }
}

/// Offset law of the detected symbol relative to the key-determined reference
/// `Map[s] + M·π` when the base band is re-drawn uniformly by true-random DSR.
fn dsr_averaged_law(reference: usize, cfg: &Y00Config, cache: &mut [Option<Vec<f64>>]) -> Result<Vec<f64>> {
    let two_m = 2 * cfg.m;
    let half = reference / cfg.m;
    let mut law = vec![0.0; two_m];
    for j in 0..cfg.m {
        let sent = j + cfg.m * half;
        if cache[sent].is_none() {
            cache[sent] = Some(symbol_error_dist(sent, cfg)?);
        }
        let dist = cache[sent].as_ref().unwrap();
        for (d, &p) in dist.iter().enumerate() {
            let detected = (sent + d) % two_m;
            law[(detected + two_m - reference) % two_m] += p / cfg.m as f64;
        }
    }
    Ok(law)
}

/// Per-period error-pattern distribution for `cfg` under running key `r` and
/// one period of plaintext `x` (zeros when `x` is empty).
pub fn pattern_dist(cfg: &Y00Config, r: &RunningKey, x: &[u8]) -> Result<ErrorPatternDist> {
    cfg.validate()?;
    let t_lcm = r.t_lcm;
    let bits = (2 * cfg.m).trailing_zeros() as u64;
    let dense = t_lcm * bits <= DENSE_PATTERN_BITS as u64;
    let key_dependent = cfg.geometry == Geometry::Isk || cfg.dsr == DsrMode::TrueRandom;
    if matches!(cfg.mapping.kind, MappingKind::Scrambled(_)) && !dense {
        return Err(Error::Unsupported(
            "scrambled mapping with a pattern space beyond the dense cap".into(),
        ));
    }

    if !key_dependent {
        // PSK without true-random DSR: every slot has the same offset law
        let law = symbol_error_dist(0, cfg)?;
        return Ok(ErrorPatternDist {
            m: cfg.m,
            t_lcm,
            classes: vec![SlotClass { count: t_lcm, probs: law }],
            slot_order: dense.then(|| vec![0; t_lcm as usize]),
        });
    }

    if t_lcm > SLOT_ENUMERATION_CAP {
        return Err(Error::Infeasible(format!(
            "key-dependent slot laws need {t_lcm} slots enumerated (cap {SLOT_ENUMERATION_CAP})"
        )));
    }
    let t = t_lcm as usize;
    if r.horizon() < t || r.dx.len() < t {
        return invalid(format!("running key covers {} slots, one period is {t}", r.horizon()));
    }
    if !x.is_empty() && x.len() < t {
        return invalid("plaintext must cover one full period");
    }
    let schedule = cfg.mapping.schedule(if dense { t } else { 1 });
    let two_m = 2 * cfg.m;
    let mut counts = vec![0u64; two_m];
    let mut order = Vec::new();
    for slot in 0..t {
        let table = schedule.at(if schedule.is_fixed() { 0 } else { slot });
        let base = table[r.s[slot] as usize];
        let xt = if x.is_empty() { 0 } else { x[slot] };
        let reference = crate::y00::symbol_index(cfg.m, base, base, xt, r.dx[slot]);
        counts[reference] += 1;
        if dense {
            order.push(reference);
        }
    }
    let mut cache = vec![None; two_m];
    let mut classes = Vec::new();
    let mut class_of = vec![usize::MAX; two_m];
    for (reference, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let probs = if cfg.dsr == DsrMode::TrueRandom {
            dsr_averaged_law(reference, cfg, &mut cache)?
        } else {
            symbol_error_dist(reference, cfg)?
        };
        class_of[reference] = classes.len();
        classes.push(SlotClass { count, probs });
    }
    let slot_order = dense.then(|| order.into_iter().map(|r| class_of[r]).collect());
    Ok(ErrorPatternDist { m: cfg.m, t_lcm, classes, slot_order })
}

/// Total-variation distance of the base-band marginal `δ mod M` from uniform.
pub fn base_band_tv_from_uniform(law: &[f64], m: usize) -> f64 {
    let mut marginal = vec![0.0; m];
    for (d, &p) in law.iter().enumerate() {
        marginal[d % m] += p;
    }
    0.5 * marginal.iter().map(|p| (p - 1.0 / m as f64).abs()).sum::<f64>()
}

/// Crossover of a binary antipodal decision at distance `d` with
/// per-quadrature standard deviation `sigma`.
pub fn binary_crossover(distance: f64, sigma: f64) -> f64 {
    0.5 * erfc(distance / (2.0 * sigma * SQRT_2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prng::{expand_running_key, GeneratorSpec, LfsrSpec};
    use crate::y00::{modulate, MappingTable};
    use rand::Rng;

    fn cfg(m: usize, alpha0: f64, eta: f64) -> Y00Config {
        let s = GeneratorSpec::Lfsr(LfsrSpec::new(4, &[4, 1], &[1, 0, 0, 0]).unwrap());
        let dx = GeneratorSpec::Lfsr(LfsrSpec::new(3, &[3, 1], &[1, 0, 0]).unwrap());
        Y00Config::psk(m, alpha0, eta, s, dx)
    }

    fn mc_offsets(true_m: usize, cfg: &Y00Config, n: usize, seed: u64) -> Vec<f64> {
        let regions = eve_regions(cfg);
        let normal = Normal::new(0.0, cfg.noise.sigma()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mean = cfg.amplitude(true_m) * cfg.eta;
        let mut counts = vec![0usize; 2 * cfg.m];
        for _ in 0..n {
            let y = mean + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
            let c = decide_symbol(y, &regions);
            counts[(c + 2 * cfg.m - true_m) % (2 * cfg.m)] += 1;
        }
        counts.iter().map(|&c| c as f64 / n as f64).collect()
    }

    #[test]
    fn psk_cell_centers_and_rotations() {
        let r = DecisionRegionSet::Psk { m: 4 };
        for k in 0..8 {
            let y = Complex64::from_polar(2.0, PI * k as f64 / 4.0);
            assert_eq!(decide_symbol(y, &r), k);
            let rotated = y * Complex64::from_polar(1.0, PI / 4.0 * 2.0);
            assert_eq!(decide_symbol(rotated, &r), (k + 2) % 8);
        }
        // boundary between cells 0 and 1 goes to 0; between 1 and 2 to 1
        assert_eq!(decide_symbol(Complex64::from_polar(1.0, PI / 8.0), &r), 0);
        assert_eq!(decide_symbol(Complex64::from_polar(1.0, 3.0 * PI / 8.0), &r), 1);
    }

    #[test]
    fn isk_cells() {
        let mut c = cfg(4, 4.0, 1.0);
        c.geometry = Geometry::Isk;
        let r = c.regions();
        for m in 0..8 {
            assert_eq!(decide_symbol(c.amplitude(m), &r), m);
        }
    }

    #[test]
    fn cell_probabilities_partition_unity() {
        for (alpha, eta) in [(0.0f64, 1.0), (0.5, 1.0), (3.0, 0.7), (12.0, 1.0)] {
            let c = cfg(8, alpha.max(1e-9), eta);
            for m in [0, 5, 13] {
                let d = symbol_error_dist(m, &c).unwrap();
                assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        let mut c = cfg(8, 5.0, 0.8);
        c.geometry = Geometry::Isk;
        for m in 0..16 {
            let d = symbol_error_dist(m, &c).unwrap();
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vanishing_noise_and_vanishing_signal_limits() {
        let strong = symbol_error_dist(3, &cfg(4, 200.0, 1.0)).unwrap();
        assert!(strong[0] > 1.0 - 1e-12);
        let weak = symbol_error_dist(3, &cfg(4, 1e-9, 1.0)).unwrap();
        for p in weak {
            assert!((p - 0.125).abs() < 1e-9);
        }
        let tapless = symbol_error_dist(3, &cfg(4, 5.0, 0.0)).unwrap();
        for p in tapless {
            assert!((p - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn psk_laws_are_shift_invariant() {
        let c = cfg(8, 2.5, 0.9);
        let base = symbol_error_dist(0, &c).unwrap();
        for m in 1..16 {
            let d = symbol_error_dist(m, &c).unwrap();
            for (a, b) in base.iter().zip(&d) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn psk_m2_crossover_matches_gaussian_tail_and_monte_carlo() {
        // M = 2, α0 = 2: antipodal pair at distance 4; adjacent cells at
        // distance 2√2. The half-plane law is a product of two Gaussian tails.
        let c = cfg(2, 2.0, 1.0);
        let sigma = c.noise.sigma();
        let law = symbol_error_dist(0, &c).unwrap();
        // Eve decides among 4 quadrant sectors centred on 0, 90, 180, 270 deg.
        // Rotating by 45 deg makes the sector boundaries the coordinate axes.
        let u = 2.0 / SQRT_2;
        let p_pos = 1.0 - q_function(u / sigma);
        let p_neg = q_function(u / sigma);
        let expected = [p_pos * p_pos, p_pos * p_neg, p_neg * p_neg, p_neg * p_pos];
        for (a, b) in law.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let mc = mc_offsets(0, &c, 400_000, 1);
        for (p, f) in law.iter().zip(mc) {
            let s = (p * (1.0 - p) / 400_000f64).sqrt();
            assert!((p - f).abs() <= 3.0 * s + 1e-12, "{p} vs {f}");
        }
        // Bob's binary crossover at the antipodal distance
        let d = 4.0;
        assert!((binary_crossover(d, sigma) - q_function(d / (2.0 * sigma))).abs() < 1e-15);
    }

    #[test]
    fn psk4_offset_law_matches_monte_carlo() {
        let c = cfg(4, 1.0, 1.0);
        let law = symbol_error_dist(0, &c).unwrap();
        let n = 2_000_000;
        let mc = mc_offsets(0, &c, n, 42);
        for (p, f) in law.iter().zip(mc) {
            let s = (p * (1.0 - p) / n as f64).sqrt();
            assert!((p - f).abs() <= 4.0 * s, "{p} vs {f}");
        }
    }

    #[test]
    fn uniform_outcomes_match_cell_measures() {
        // uniform on the unit disk: every PSK sector has measure 1/(2M)
        let r = DecisionRegionSet::Psk { m: 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let mut counts = [0usize; 8];
        let mut drawn = 0;
        while drawn < n {
            let y = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if y.norm() > 1.0 {
                continue;
            }
            counts[decide_symbol(y, &r)] += 1;
            drawn += 1;
        }
        let p = 0.125;
        let s = (p * (1.0 - p) / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - p).abs() < 4.0 * s);
        }
    }

    #[test]
    fn tap_is_deterministic_and_eta_zero_is_signal_free() {
        let c = cfg(4, 3.0, 0.0);
        let r = expand_running_key(&[1, 0, 0, 0], &[1, 0, 0], &c, 2000).unwrap();
        let x = vec![0u8; 2000];
        let trace = modulate(&r, &x, &c).unwrap();
        let a = tap_and_measure(&trace, &c, 11).unwrap();
        let b = tap_and_measure(&trace, &c, 11).unwrap();
        assert_eq!(a, b);
        // outcome statistics do not depend on the sent symbol
        let mean: Complex64 = a.iter().sum::<Complex64>() / a.len() as f64;
        assert!(mean.norm() < 0.1);
    }

    #[test]
    fn pattern_dist_uniform_and_product_cases() {
        let u = ErrorPatternDist::uniform(2, 1);
        assert_eq!(u.min_prob(), 0.25);
        let two = ErrorPatternDist::from_slots(2, vec![vec![0.25; 4], vec![0.25; 4]]).unwrap();
        assert_eq!(two.min_prob(), 1.0 / 16.0);
        assert_eq!(two.pattern_len(), 4);
        assert!((two.dense().unwrap().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pattern_dist_psk4_min_prob_matches_dense_enumeration() {
        let mut c = cfg(4, 1.5, 1.0);
        c.prng_s = GeneratorSpec::Lfsr(LfsrSpec::new(1, &[1], &[1]).unwrap());
        c.prng_dx = GeneratorSpec::Lfsr(LfsrSpec::new(2, &[2, 1], &[1, 0]).unwrap());
        let r = expand_running_key(&[1], &[1, 0], &c, 3).unwrap();
        assert_eq!(r.t_lcm, 3);
        let dist = pattern_dist(&c, &r, &[]).unwrap();
        let table = dist.dense().unwrap();
        assert_eq!(table.len(), 512);
        let dense_min = table.iter().copied().fold(f64::INFINITY, f64::min);
        let slot_min = symbol_error_dist(0, &c).unwrap().into_iter().fold(f64::INFINITY, f64::min);
        assert!((dense_min - slot_min.powi(3)).abs() < 1e-15);
        assert!((dist.min_prob() - dense_min).abs() / dense_min < 1e-12);
        assert!(dist.min_prob() <= 8f64.powi(-3));
        assert!((table.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dsr_flattens_base_band_marginal() {
        for (m, alpha) in [(4, 1.0), (8, 3.0), (16, 6.0)] {
            let mut c = cfg(m, alpha, 1.0);
            c.mapping = MappingTable::irregular_default(m);
            let r = expand_running_key(&[1, 0, 0, 0], &[1, 0, 0], &c, 105).unwrap();
            let plain = pattern_dist(&c, &r, &[]).unwrap();
            c.dsr = DsrMode::TrueRandom;
            let dsr = pattern_dist(&c, &r, &[]).unwrap();
            let tv_plain = base_band_tv_from_uniform(&plain.classes[0].probs, m);
            for class in &dsr.classes {
                assert!((class.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(base_band_tv_from_uniform(&class.probs, m) < tv_plain);
            }
            assert!(dsr.log2_min_prob() <= -(dsr.t_lcm as f64) * (2.0 * m as f64).log2() + 1e-9);
        }
    }

    #[test]
    fn scrambled_large_period_rejected() {
        let mut c = cfg(4, 1.0, 1.0);
        c.mapping = MappingTable::scrambled(4, c.prng_dx.clone());
        let r = expand_running_key(&[1, 0, 0, 0], &[1, 0, 0], &c, 105).unwrap();
        assert!(matches!(pattern_dist(&c, &r, &[]), Err(Error::Unsupported(_))));
    }
}
