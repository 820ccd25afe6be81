//! Exact Shannon and min-entropy computations on enumerated joint
//! distributions of a few named discrete variables.

use serde::{Deserialize, Serialize};

use crate::channel::symbol_error_dist;
use crate::error::{invalid, Error, Result};
use crate::y00::{symbol_index, Y00Config};

/// Largest joint table handled.
pub const MAX_TABLE: usize = 1 << 20;

/// Tolerance for equalities between entropies.
pub const ENTROPY_TOL: f64 = 1e-12;

/// Probability table over the product of named finite alphabets. The first
/// variable is the most significant index digit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDist {
    names: Vec<String>,
    sizes: Vec<usize>,
    probs: Vec<f64>,
}

impl JointDist {
    pub fn new(names: &[&str], sizes: &[usize], probs: Vec<f64>) -> Result<Self> {
        if names.len() != sizes.len() {
            return invalid("one alphabet size per variable");
        }
        let mut sorted: Vec<&&str> = names.iter().collect();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != names.len() {
            return invalid("variable names must be distinct");
        }
        let total = sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
        match total {
            Some(t) if t <= MAX_TABLE && t > 0 => {
                if probs.len() != t {
                    return invalid(format!("table has {} entries, alphabets need {t}", probs.len()));
                }
            }
            _ => return Err(Error::Infeasible(format!("joint table exceeds {MAX_TABLE} entries"))),
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || probs.iter().any(|&p| !(p >= 0.0)) {
            return invalid(format!("probabilities must be nonnegative and sum to 1 (got {sum})"));
        }
        Ok(JointDist { names: names.iter().map(|s| s.to_string()).collect(), sizes: sizes.to_vec(), probs })
    }

    /// Builds a table by evaluating `f` on every joint outcome.
    pub fn from_fn(names: &[&str], sizes: &[usize], f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let total: usize = sizes.iter().product();
        if total > MAX_TABLE {
            return Err(Error::Infeasible(format!("joint table exceeds {MAX_TABLE} entries")));
        }
        let mut probs = Vec::with_capacity(total);
        let mut idx = vec![0usize; sizes.len()];
        for _ in 0..total {
            probs.push(f(&idx));
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < sizes[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self::new(names, sizes, probs)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn position(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown variable {name}")))
    }

    fn digits(&self, mut flat: usize) -> Vec<usize> {
        let mut d = vec![0; self.sizes.len()];
        for k in (0..self.sizes.len()).rev() {
            d[k] = flat % self.sizes[k];
            flat /= self.sizes[k];
        }
        d
    }

    /// Visits every joint outcome with its probability.
    pub fn for_each(&self, mut f: impl FnMut(&[usize], f64)) {
        for (flat, &p) in self.probs.iter().enumerate() {
            f(&self.digits(flat), p);
        }
    }

    /// Marginal over `vars`, in the given order.
    pub fn marginal(&self, vars: &[&str]) -> Result<JointDist> {
        let pos: Vec<usize> = vars.iter().map(|v| self.position(v)).collect::<Result<_>>()?;
        let sizes: Vec<usize> = pos.iter().map(|&p| self.sizes[p]).collect();
        let total: usize = sizes.iter().product();
        let mut probs = vec![0.0; total];
        self.for_each(|d, p| {
            let idx = pos.iter().zip(&sizes).fold(0, |acc, (&q, &s)| acc * s + d[q]);
            probs[idx] += p;
        });
        Ok(JointDist { names: vars.iter().map(|s| s.to_string()).collect(), sizes, probs })
    }

    fn shannon(&self) -> f64 {
        self.probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
    }

    /// `H(vars | given) = H(vars ∪ given) − H(given)` in bits.
    pub fn entropy(&self, vars: &[&str], given: &[&str]) -> Result<f64> {
        if vars.iter().any(|v| given.contains(v)) {
            return invalid("target and conditioning variables overlap");
        }
        let joint: Vec<&str> = vars.iter().chain(given).copied().collect();
        let h_joint = self.marginal(&joint)?.shannon();
        let h_given = if given.is_empty() { 0.0 } else { self.marginal(given)?.shannon() };
        Ok(h_joint - h_given)
    }

    /// `−log2 Σ_g max_t Pr(t, g)`: conditional min-entropy averaged over the
    /// conditioning outcomes.
    pub fn min_entropy(&self, target: &[&str], given: &[&str]) -> Result<f64> {
        if target.iter().any(|v| given.contains(v)) {
            return invalid("target and conditioning variables overlap");
        }
        let g = if given.is_empty() { 1 } else { self.marginal(given)?.probs.len() };
        let t = self.marginal(target)?.probs.len();
        let joint: Vec<&str> = given.iter().chain(target).copied().collect();
        let table = self.marginal(&joint)?;
        let guess: f64 = (0..g).map(|gi| table.probs[gi * t..(gi + 1) * t].iter().copied().fold(0.0, f64::max)).sum();
        Ok(-guess.log2())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinEntropyReport {
    /// Averaged over keys and ciphertexts.
    pub average: f64,
    /// With Eve's single most confident key per ciphertext; never above
    /// `average`.
    pub best_key: f64,
}

/// Both min-entropy forms of `target` given `(keys, observed)`.
pub fn min_entropy(dist: &JointDist, target: &[&str], keys: &[&str], observed: &[&str]) -> Result<MinEntropyReport> {
    let given: Vec<&str> = keys.iter().chain(observed).copied().collect();
    let average = dist.min_entropy(target, &given)?;
    // Σ_c Pr(c) max_{r,x} Pr(x | r, c), skipping keys with Pr(r, c) = 0
    let rc = dist.marginal(&given)?;
    let c = if observed.is_empty() { None } else { Some(dist.marginal(observed)?) };
    let n_c = c.as_ref().map_or(1, |c| c.probs.len());
    let n_r = rc.probs.len() / n_c;
    let all: Vec<&str> = keys.iter().chain(observed).chain(target).copied().collect();
    let full = dist.marginal(&all)?;
    let n_x = full.probs.len() / rc.probs.len();
    let mut guess = 0.0;
    for ci in 0..n_c {
        let pc = c.as_ref().map_or(1.0, |c| c.probs[ci]);
        if pc == 0.0 {
            continue;
        }
        let mut best: f64 = 0.0;
        for ri in 0..n_r {
            let prc = rc.probs[ri * n_c + ci];
            if prc == 0.0 {
                continue;
            }
            let base = (ri * n_c + ci) * n_x;
            let top = full.probs[base..base + n_x].iter().copied().fold(0.0, f64::max);
            best = best.max(top / prc);
        }
        guess += pc * best;
    }
    Ok(MinEntropyReport { average, best_key: -guess.log2() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eq10Report {
    /// `H(S | C_E, X)`.
    pub lhs: f64,
    /// `H(S, C_E, X) − H(C_E, X, E)`.
    pub rhs: f64,
    /// `lhs − rhs = H(E | C_E, X)`.
    pub gap: f64,
    /// `H(S | C_E, X, E)`, zero under the cipher constraint.
    pub residual_given_noise: f64,
    pub equality: bool,
}

/// Checks `H(S|C_E,X) ≥ H(S,C_E,X) − H(C_E,X,E)` for a table obeying
/// `C_E = X ⊕ S ⊕ E` (bitwise on the outcome indices).
pub fn check_eq10(dist: &JointDist, s: &str, ce: &str, x: &str, e: &str) -> Result<Eq10Report> {
    let pos: Vec<usize> = [s, ce, x, e].iter().map(|v| dist.position(v)).collect::<Result<_>>()?;
    let mut violated = false;
    dist.for_each(|d, p| {
        if p > 0.0 && d[pos[1]] != d[pos[2]] ^ d[pos[0]] ^ d[pos[3]] {
            violated = true;
        }
    });
    if violated {
        return invalid("table violates C_E = X + S + E mod 2");
    }
    let lhs = dist.entropy(&[s], &[ce, x])?;
    let rhs = dist.entropy(&[s, ce, x], &[])? - dist.entropy(&[ce, x, e], &[])?;
    let residual_given_noise = dist.entropy(&[s], &[ce, x, e])?;
    let gap = lhs - rhs;
    Ok(Eq10Report { lhs, rhs, gap, residual_given_noise, equality: gap.abs() <= ENTROPY_TOL })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecrecyReport {
    pub holds: bool,
    /// `max |Pr(x|c) − Pr(x)|` over `Pr(c) > 0`.
    pub max_deviation: f64,
    /// `max |Pr(x|c) − Pr(c)|`: the same test against the marginal of `C`.
    pub marginal_c_deviation: f64,
}

/// Shannon's perfect secrecy `Pr(X | C) = Pr(X)`.
pub fn perfect_secrecy_check(dist: &JointDist, x: &str, c: &str) -> Result<SecrecyReport> {
    let xc = dist.marginal(&[x, c])?;
    let px = dist.marginal(&[x])?;
    let pc = dist.marginal(&[c])?;
    let nc = pc.probs.len();
    let mut dev: f64 = 0.0;
    let mut vs_c: f64 = 0.0;
    for (xi, &pxv) in px.probs.iter().enumerate() {
        for (ci, &pcv) in pc.probs.iter().enumerate() {
            if pcv > 0.0 {
                let cond = xc.probs[xi * nc + ci] / pcv;
                dev = dev.max((cond - pxv).abs());
                vs_c = vs_c.max((cond - pcv).abs());
            }
        }
    }
    Ok(SecrecyReport { holds: dev <= ENTROPY_TOL, max_deviation: dev, marginal_c_deviation: vs_c })
}

/// One-slot view of Eve: joint law of the plaintext bit `X` and her
/// detected symbol `C` with the basis word uniform and `Δx` either uniform
/// or fixed at zero.
pub fn eve_view_dist(cfg: &Y00Config, average_dx: bool) -> Result<JointDist> {
    let m = cfg.m;
    let laws: Vec<Vec<f64>> = (0..2 * m).map(|k| symbol_error_dist(k, cfg)).collect::<Result<_>>()?;
    let dxs: &[u8] = if average_dx { &[0, 1] } else { &[0] };
    let mut probs = vec![0.0; 2 * 2 * m];
    let weight = 0.5 / (m * dxs.len()) as f64;
    for x in 0..2u8 {
        for s in 0..m {
            let base = cfg.mapping.table[s];
            for &dx in dxs {
                let sent = symbol_index(m, base, base, x, dx);
                for (d, &p) in laws[sent].iter().enumerate() {
                    probs[x as usize * 2 * m + (sent + d) % (2 * m)] += weight * p;
                }
            }
        }
    }
    // renormalize away the quadrature residue
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    JointDist::new(&["X", "C"], &[2, 2 * m], probs)
}
