//! Quantum detection on small coherent-state ensembles: Fock-basis states,
//! Gram matrices, square-root and Helstrom measurements, the minimum-error
//! optimality conditions, the Cauchy–Schwarz success bound and the
//! data-processing check under random local channels.
//!
//! Pure-state ensembles are handled in the span of their states: column `j`
//! of `G^{1/2}` gives orthonormal coordinates of state `j`, so every operator
//! is at most `K × K` regardless of the Fock cutoff.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Eigenvalues below this are treated as zero when inverting on a support.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Smallest cutoff the full-precision expansion accepts.
pub fn min_cutoff(alpha: Complex64) -> usize {
    let n = alpha.norm_sqr();
    (n + 10.0 * (n + 1.0).sqrt() + 20.0).ceil() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    pub amps: Vec<Complex64>,
}

impl FockVector {
    pub fn n_max(&self) -> usize {
        self.amps.len() - 1
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &FockVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn to_vector(&self) -> CVector {
        CVector::from_vec(self.amps.clone())
    }
}

fn coherent_amplitudes(alpha: Complex64, n_max: usize) -> Vec<Complex64> {
    let mut amps = Vec::with_capacity(n_max + 1);
    let mut a = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    amps.push(a);
    for n in 1..=n_max {
        a = a * alpha / (n as f64).sqrt();
        amps.push(a);
    }
    amps
}

/// `|α⟩` truncated at `n_max`, which must satisfy the cutoff rule.
pub fn coherent_fock(alpha: Complex64, n_max: usize) -> Result<FockVector> {
    if n_max < min_cutoff(alpha) {
        return invalid(format!("cutoff {n_max} below {} for |alpha| = {}", min_cutoff(alpha), alpha.norm()));
    }
    let v = FockVector { amps: coherent_amplitudes(alpha, n_max) };
    let err = 1.0 - v.norm_sqr();
    if err.abs() >= 1e-12 {
        return Err(Error::Infeasible(format!("truncation norm error {err:e}")));
    }
    Ok(v)
}

/// `|α⟩` on a small cutoff, renormalized. Returns the discarded weight.
pub fn coherent_fock_truncated(alpha: Complex64, n_max: usize) -> (FockVector, f64) {
    let mut amps = coherent_amplitudes(alpha, n_max);
    let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let s = norm2.sqrt();
    amps.iter_mut().for_each(|a| *a /= s);
    (FockVector { amps }, 1.0 - norm2)
}

/// `⟨β|α⟩ = exp(−(|α|² + |β|²)/2 + β̄α)`.
pub fn coherent_overlap(beta: Complex64, alpha: Complex64) -> Complex64 {
    (Complex64::new(-(alpha.norm_sqr() + beta.norm_sqr()) / 2.0, 0.0) + beta.conj() * alpha).exp()
}

/// Hermitian functional calculus `V f(λ) V†`.
pub fn hermitian_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let d = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(f(l), 0.0)));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut v: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn sqrt_psd(m: &CMatrix) -> CMatrix {
    hermitian_map(m, |l| l.max(0.0).sqrt())
}

/// Inverse square root on the support (eigenvalues above [`SUPPORT_TOL`]).
pub fn inv_sqrt_on_support(m: &CMatrix) -> CMatrix {
    hermitian_map(m, |l| if l > SUPPORT_TOL { 1.0 / l.sqrt() } else { 0.0 })
}

/// Projector onto the support of a PSD matrix.
pub fn support_projector(m: &CMatrix) -> CMatrix {
    hermitian_map(m, |l| if l > SUPPORT_TOL { 1.0 } else { 0.0 })
}

pub fn trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().map(|l| l.abs()).sum()
}

fn real_trace(m: &CMatrix) -> f64 {
    m.trace().re
}

/// Pure product states of coherent amplitudes, one amplitude per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureStateEnsemble {
    pub priors: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
}

/// Dimension guards for exact collective measurements.
pub const MAX_SLOTS: usize = 3;
pub const MAX_HYPOTHESES: usize = 16;

impl PureStateEnsemble {
    pub fn new(priors: Vec<f64>, states: Vec<Vec<Complex64>>) -> Result<Self> {
        validate_priors(&priors)?;
        if priors.len() != states.len() {
            return invalid("one prior per state");
        }
        if states.len() > MAX_HYPOTHESES {
            return Err(Error::Infeasible(format!("{} hypotheses exceed {MAX_HYPOTHESES}", states.len())));
        }
        let slots = states.first().map_or(0, |s| s.len());
        if slots == 0 || slots > MAX_SLOTS || states.iter().any(|s| s.len() != slots) {
            return invalid(format!("states need a common slot count in 1..={MAX_SLOTS}"));
        }
        Ok(PureStateEnsemble { priors, states })
    }

    pub fn uniform(states: Vec<Vec<Complex64>>) -> Result<Self> {
        let k = states.len();
        Self::new(vec![1.0 / k as f64; k], states)
    }

    /// `G[i][j] = ⟨ψ_i|ψ_j⟩` from the closed-form coherent overlap.
    pub fn gram(&self) -> CMatrix {
        let k = self.states.len();
        CMatrix::from_fn(k, k, |i, j| {
            self.states[i]
                .iter()
                .zip(&self.states[j])
                .map(|(&b, &a)| coherent_overlap(b, a))
                .product()
        })
    }

    /// The same Gram matrix from explicit Fock expansions.
    pub fn gram_numeric(&self) -> Result<CMatrix> {
        let k = self.states.len();
        let cutoff = self.states.iter().flatten().map(|&a| min_cutoff(a)).max().unwrap_or(20);
        let fock: Vec<Vec<FockVector>> = self
            .states
            .iter()
            .map(|s| s.iter().map(|&a| coherent_fock(a, cutoff)).collect())
            .collect::<Result<_>>()?;
        Ok(CMatrix::from_fn(k, k, |i, j| {
            fock[i].iter().zip(&fock[j]).map(|(a, b)| a.inner(b)).product()
        }))
    }

    /// Density-matrix ensemble in span coordinates.
    pub fn to_density(&self) -> DensityEnsemble {
        let coords = sqrt_psd(&self.gram());
        let rhos = (0..self.states.len())
            .map(|j| {
                let v = coords.column(j).into_owned();
                &v * v.adjoint()
            })
            .collect();
        DensityEnsemble { priors: self.priors.clone(), rhos }
    }

    /// Span coordinates of each state (columns of `G^{1/2}`).
    pub fn coordinates(&self) -> Vec<CVector> {
        let coords = sqrt_psd(&self.gram());
        (0..self.states.len()).map(|j| coords.column(j).into_owned()).collect()
    }
}

fn validate_priors(priors: &[f64]) -> Result<()> {
    let total: f64 = priors.iter().sum();
    if priors.is_empty() || (total - 1.0).abs() > 1e-9 || priors.iter().any(|&p| p < 0.0) {
        return invalid(format!("priors must be nonnegative and sum to 1 (got {total})"));
    }
    Ok(())
}

/// Hypotheses given as density matrices on a common space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEnsemble {
    pub priors: Vec<f64>,
    pub rhos: Vec<CMatrix>,
}

impl DensityEnsemble {
    pub fn new(priors: Vec<f64>, rhos: Vec<CMatrix>) -> Result<Self> {
        validate_priors(&priors)?;
        if priors.len() != rhos.len() {
            return invalid("one prior per state");
        }
        let d = rhos[0].nrows();
        for r in &rhos {
            if r.nrows() != d || r.ncols() != d {
                return invalid("density matrices must share one square dimension");
            }
            if (real_trace(r) - 1.0).abs() > 1e-9 {
                return invalid(format!("density matrix trace {}", real_trace(r)));
            }
            if hermitian_eigenvalues(r)[0] < -1e-10 {
                return invalid("density matrix is not positive");
            }
        }
        Ok(DensityEnsemble { priors, rhos })
    }

    pub fn dim(&self) -> usize {
        self.rhos[0].nrows()
    }

    /// `Σ_r Pr(r)·ρ(r)`.
    pub fn average_state(&self) -> CMatrix {
        self.rhos
            .iter()
            .zip(&self.priors)
            .fold(CMatrix::zeros(self.dim(), self.dim()), |acc, (r, &p)| acc + r * Complex64::new(p, 0.0))
    }

    pub fn success(&self, meas: &MeasurementSet) -> f64 {
        self.rhos
            .iter()
            .zip(&self.priors)
            .zip(&meas.ops)
            .map(|((r, &p), m)| p * real_trace(&(m * r)))
            .sum()
    }
}

/// Mixtures of coherent product states, one mixture per hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStateEnsemble {
    pub priors: Vec<f64>,
    /// `components[r]`: `(weight, per-slot amplitudes)` pairs.
    pub components: Vec<Vec<(f64, Vec<Complex64>)>>,
}

/// Cap on the total number of mixture components.
pub const MAX_COMPONENTS: usize = 64;

impl MixedStateEnsemble {
    pub fn new(priors: Vec<f64>, components: Vec<Vec<(f64, Vec<Complex64>)>>) -> Result<Self> {
        validate_priors(&priors)?;
        if priors.len() != components.len() {
            return invalid("one prior per mixture");
        }
        let total: usize = components.iter().map(|c| c.len()).sum();
        if total > MAX_COMPONENTS {
            return Err(Error::Infeasible(format!("{total} components exceed {MAX_COMPONENTS}")));
        }
        for mix in &components {
            let w: f64 = mix.iter().map(|c| c.0).sum();
            if mix.is_empty() || (w - 1.0).abs() > 1e-9 || mix.iter().any(|c| c.0 < 0.0) {
                return invalid(format!("mixture weights must sum to 1 (got {w})"));
            }
        }
        Ok(MixedStateEnsemble { priors, components })
    }

    pub fn from_pure(pure: &PureStateEnsemble) -> Self {
        MixedStateEnsemble {
            priors: pure.priors.clone(),
            components: pure.states.iter().map(|s| vec![(1.0, s.clone())]).collect(),
        }
    }

    /// Density matrices in the span of all components.
    pub fn to_density(&self) -> DensityEnsemble {
        let all: Vec<(usize, f64, &Vec<Complex64>)> = self
            .components
            .iter()
            .enumerate()
            .flat_map(|(r, mix)| mix.iter().map(move |(w, s)| (r, *w, s)))
            .collect();
        let n = all.len();
        let gram = CMatrix::from_fn(n, n, |i, j| {
            all[i].2.iter().zip(all[j].2).map(|(&b, &a)| coherent_overlap(b, a)).product()
        });
        let coords = sqrt_psd(&gram);
        let mut rhos = vec![CMatrix::zeros(n, n); self.priors.len()];
        for (j, &(r, w, _)) in all.iter().enumerate() {
            let v = coords.column(j).into_owned();
            rhos[r] += &v * v.adjoint() * Complex64::new(w, 0.0);
        }
        DensityEnsemble { priors: self.priors.clone(), rhos }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub ops: Vec<CMatrix>,
}

impl MeasurementSet {
    /// Largest deviation of `Σ M` from the identity on `support`.
    pub fn completeness_error(&self, support: &CMatrix) -> f64 {
        let d = support.nrows();
        let sum = self.ops.iter().fold(CMatrix::zeros(d, d), |acc, m| acc + m);
        let gap = support * (sum - CMatrix::identity(d, d)) * support;
        hermitian_eigenvalues(&gap).iter().map(|l| l.abs()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.ops
            .iter()
            .map(|m| hermitian_eigenvalues(m)[0])
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SrmResult {
    pub measurement: MeasurementSet,
    pub success: f64,
    /// Rank of the ensemble operator; below the dimension the measurement
    /// is complete only on its support.
    pub support_rank: usize,
}

/// Square-root measurement `M(r) = Σ^{-1/2} Pr(r)ρ(r) Σ^{-1/2}`.
pub fn srm(ens: &DensityEnsemble) -> SrmResult {
    let sigma = ens.average_state();
    let half = inv_sqrt_on_support(&sigma);
    let ops: Vec<CMatrix> = ens
        .rhos
        .iter()
        .zip(&ens.priors)
        .map(|(r, &p)| &half * r * Complex64::new(p, 0.0) * &half)
        .collect();
    let support_rank = hermitian_eigenvalues(&sigma).iter().filter(|&&l| l > SUPPORT_TOL).count();
    let measurement = MeasurementSet { ops };
    let success = ens.success(&measurement);
    SrmResult { measurement, success, support_rank }
}

/// `½ + ½‖p0ρ0 − p1ρ1‖₁`.
pub fn helstrom_binary(rho0: &CMatrix, rho1: &CMatrix, p0: f64) -> f64 {
    let diff = rho0 * Complex64::new(p0, 0.0) - rho1 * Complex64::new(1.0 - p0, 0.0);
    0.5 + 0.5 * trace_norm(&diff)
}

/// Helstrom for two pure states from their overlap.
pub fn helstrom_pure(overlap_sqr: f64, p0: f64) -> f64 {
    0.5 * (1.0 + (1.0 - 4.0 * p0 * (1.0 - p0) * overlap_sqr).max(0.0).sqrt())
}

/// Residuals of the minimum-error optimality conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeReport {
    pub gamma: CMatrix,
    /// `‖Γ − Γ†‖`.
    pub hermiticity: f64,
    /// `max_r max(‖[W(r) − Γ]M(r)‖, ‖M(r)[W(r) − Γ]‖)`.
    pub stationarity: f64,
    /// `max_{r,r'} ‖M(r)[W(r') − W(r)]M(r')‖`.
    pub cross: f64,
    /// `min_r λ_min(W(r) − Γ)`; nonnegative at the optimum.
    pub min_eig_w_minus_gamma: f64,
    /// `min_r λ_min(Γ − W(r))`, reported for the opposite sign reading.
    pub min_eig_gamma_minus_w: f64,
    pub success: f64,
}

impl LagrangeReport {
    pub fn max_residual(&self) -> f64 {
        self.hermiticity.max(self.stationarity).max(self.cross)
    }
}

/// `W(r) = −Pr(r)ρ(r)`, `Γ = Σ M(r)W(r)` and the condition residuals.
pub fn optimality_residuals(ens: &DensityEnsemble, meas: &MeasurementSet) -> LagrangeReport {
    let d = ens.dim();
    let w: Vec<CMatrix> = ens
        .rhos
        .iter()
        .zip(&ens.priors)
        .map(|(r, &p)| r * Complex64::new(-p, 0.0))
        .collect();
    let gamma = meas.ops.iter().zip(&w).fold(CMatrix::zeros(d, d), |acc, (m, w)| acc + m * w);
    let hermiticity = (&gamma - gamma.adjoint()).norm();
    let mut stationarity: f64 = 0.0;
    let mut min_wg = f64::INFINITY;
    let mut min_gw = f64::INFINITY;
    for (m, wr) in meas.ops.iter().zip(&w) {
        let diff = wr - &gamma;
        stationarity = stationarity.max((&diff * m).norm()).max((m * &diff).norm());
        min_wg = min_wg.min(hermitian_eigenvalues(&diff)[0]);
        min_gw = min_gw.min(hermitian_eigenvalues(&(-diff))[0]);
    }
    let mut cross: f64 = 0.0;
    for (i, mi) in meas.ops.iter().enumerate() {
        for (j, mj) in meas.ops.iter().enumerate() {
            if i != j {
                cross = cross.max((mi * (&w[j] - &w[i]) * mj).norm());
            }
        }
    }
    let success = -real_trace(&gamma);
    LagrangeReport {
        gamma,
        hermiticity,
        stationarity,
        cross,
        min_eig_w_minus_gamma: min_wg,
        min_eig_gamma_minus_w: min_gw,
        success,
    }
}

/// Stopping rule of the fixed-point refinement.
pub const REFINE_TOL: f64 = 1e-8;
pub const REFINE_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalResult {
    pub measurement: MeasurementSet,
    pub success: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Minimum-error measurement by the fixed-point map
/// `M(r) ← Γ⁻¹ R(r) M(r) R(r) Γ⁻¹`, `Γ = (Σ R M R)^{1/2}`, `R(r) = Pr(r)ρ(r)`,
/// started from the square-root measurement.
pub fn optimal_measurement(ens: &DensityEnsemble) -> OptimalResult {
    let r: Vec<CMatrix> = ens
        .rhos
        .iter()
        .zip(&ens.priors)
        .map(|(rho, &p)| rho * Complex64::new(p, 0.0))
        .collect();
    let mut meas = srm(ens).measurement;
    let mut residual = optimality_residuals(ens, &meas).stationarity;
    let mut iterations = 0;
    let d = ens.dim();
    while residual > REFINE_TOL && iterations < REFINE_MAX_ITER {
        iterations += 1;
        let g2 = meas
            .ops
            .iter()
            .zip(&r)
            .fold(CMatrix::zeros(d, d), |acc, (m, ri)| acc + ri * m * ri);
        let g_inv = hermitian_map(&g2, |l| if l > SUPPORT_TOL * SUPPORT_TOL { 1.0 / l.sqrt() } else { 0.0 });
        meas.ops = meas
            .ops
            .iter()
            .zip(&r)
            .map(|(m, ri)| {
                let next = &g_inv * ri * m * ri * &g_inv;
                (&next + next.adjoint()) * Complex64::new(0.5, 0.0)
            })
            .collect();
        if iterations % 10 == 0 {
            residual = optimality_residuals(ens, &meas).stationarity;
        }
    }
    residual = optimality_residuals(ens, &meas).stationarity;
    let success = ens.success(&meas);
    OptimalResult { measurement: meas, success, iterations, residual }
}

/// Best available success: Helstrom for two hypotheses, the refined
/// optimum otherwise.
pub fn best_success(ens: &DensityEnsemble) -> f64 {
    if ens.rhos.len() == 2 {
        helstrom_binary(&ens.rhos[0], &ens.rhos[1], ens.priors[0])
    } else {
        optimal_measurement(ens).success
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsBound {
    /// `Σ o⁴ / Σ o²` with `o(r) = |⟨ψ(r)|μ(r)⟩|²`.
    pub ratio_bound: f64,
    /// `√(Σ Pr² · Σ o⁴)`, the Cauchy–Schwarz upper bound on the success.
    pub cauchy_schwarz: f64,
    pub achieved: f64,
    /// `max_r |Pr(r) − o(r)/Σ o|`; zero when equality holds.
    pub equality_gap: f64,
    pub overlaps: Vec<f64>,
}

/// Evaluates the Cauchy–Schwarz bound for a rank-one measurement. Each
/// `M(r)` is written `|μ(r)⟩⟨μ(r)|`; `o(r)` uses the unnormalized `μ(r)`.
pub fn cs_bound(pure: &PureStateEnsemble, meas: &MeasurementSet) -> Result<CsBound> {
    let coords = pure.coordinates();
    let mut overlaps = Vec::with_capacity(coords.len());
    for (psi, m) in coords.iter().zip(&meas.ops) {
        let eig = hermitian_eigenvalues(m);
        let top = *eig.last().unwrap();
        if eig[..eig.len() - 1].iter().any(|l| l.abs() > 1e-8 * top.max(1.0)) {
            return invalid("measurement operators must be rank one");
        }
        overlaps.push((psi.adjoint() * m * psi)[(0, 0)].re);
    }
    let s2: f64 = overlaps.iter().sum();
    let s4: f64 = overlaps.iter().map(|o| o * o).sum();
    let p2: f64 = pure.priors.iter().map(|p| p * p).sum();
    let achieved: f64 = pure.priors.iter().zip(&overlaps).map(|(p, o)| p * o).sum();
    let equality_gap = pure
        .priors
        .iter()
        .zip(&overlaps)
        .map(|(p, o)| (p - o / s2).abs())
        .fold(0.0, f64::max);
    Ok(CsBound {
        ratio_bound: if s2 > 0.0 { s4 / s2 } else { 0.0 },
        cauchy_schwarz: (p2 * s4).sqrt(),
        achieved,
        equality_gap,
        overlaps,
    })
}

/// Haar-random unitary via QR of a complex Ginibre matrix with the phase fix.
pub fn haar_unitary(n: usize, rng: &mut impl Rng) -> CMatrix {
    let z = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) / 2f64.sqrt()
    });
    let qr = z.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = CMatrix::from_diagonal(&CVector::from_fn(n, |i, _| {
        let d = r[(i, i)];
        if d.norm() == 0.0 { ONE } else { d / d.norm() }
    }));
    q * phases
}

/// Kraus operators `K_j = (I ⊗ ⟨j|) U (I ⊗ |0⟩)` of a unitary on
/// system ⊗ ancilla (ancilla index fastest).
pub fn kraus_from_unitary(u: &CMatrix, dim: usize, ancilla: usize) -> Vec<CMatrix> {
    (0..ancilla)
        .map(|j| CMatrix::from_fn(dim, dim, |a, b| u[(a * ancilla + j, b * ancilla)]))
        .collect()
}

pub fn random_channel(dim: usize, ancilla: usize, rng: &mut impl Rng) -> Vec<CMatrix> {
    kraus_from_unitary(&haar_unitary(dim * ancilla, rng), dim, ancilla)
}

pub fn validate_kraus(kraus: &[CMatrix]) -> Result<()> {
    let d = kraus.first().map_or(0, |k| k.ncols());
    if d == 0 || kraus.iter().any(|k| k.nrows() != d || k.ncols() != d) {
        return invalid("Kraus operators must be square and share a dimension");
    }
    let sum = kraus.iter().fold(CMatrix::zeros(d, d), |acc, k| acc + k.adjoint() * k);
    let err = (sum - CMatrix::identity(d, d)).norm();
    if err > 1e-10 {
        return invalid(format!("Kraus completeness error {err:e}"));
    }
    Ok(())
}

pub fn apply_channel(rho: &CMatrix, kraus: &[CMatrix]) -> CMatrix {
    kraus.iter().fold(CMatrix::zeros(rho.nrows(), rho.ncols()), |acc, k| acc + k * rho * k.adjoint())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpiReport {
    pub before: f64,
    pub after: f64,
}

impl DpiReport {
    pub fn gain(&self) -> f64 {
        self.after - self.before
    }
}

/// Best success before and after a local channel on every hypothesis.
pub fn dpi_check(ens: &DensityEnsemble, kraus: &[CMatrix]) -> Result<DpiReport> {
    validate_kraus(kraus)?;
    if kraus[0].nrows() != ens.dim() {
        return invalid("channel and ensemble dimensions differ");
    }
    let after = DensityEnsemble {
        priors: ens.priors.clone(),
        rhos: ens.rhos.iter().map(|r| apply_channel(r, kraus)).collect(),
    };
    Ok(DpiReport { before: best_success(ens), after: best_success(&after) })
}

/// Binary coherent ensemble `{|α0⟩, |α1⟩}` as Fock-space density matrices
/// on a small cutoff (renormalized after truncation).
pub fn fock_binary_ensemble(a0: Complex64, a1: Complex64, p0: f64, n_max: usize) -> Result<(DensityEnsemble, f64)> {
    let (v0, e0) = coherent_fock_truncated(a0, n_max);
    let (v1, e1) = coherent_fock_truncated(a1, n_max);
    let r0 = v0.to_vector() * v0.to_vector().adjoint();
    let r1 = v1.to_vector() * v1.to_vector().adjoint();
    Ok((DensityEnsemble::new(vec![p0, 1.0 - p0], vec![r0, r1])?, e0.max(e1)))
}

/// Fock matrix of the phase-sector POVM element
/// `∫_{θ∈[a,b)} |β⟩⟨β| d²β / π`:
/// `⟨n|E|m⟩ = Γ((n+m)/2 + 1) / (2π √(n! m!)) · ∫_a^b e^{i(n−m)θ} dθ`.
pub fn sector_povm(a: f64, b: f64, n_max: usize) -> CMatrix {
    let ln_fact: Vec<f64> = (0..=n_max)
        .scan(0.0, |acc, n| {
            if n > 0 {
                *acc += (n as f64).ln();
            }
            Some(*acc)
        })
        .collect();
    CMatrix::from_fn(n_max + 1, n_max + 1, |n, m| {
        let k = n as f64 - m as f64;
        let angular = if n == m {
            Complex64::new(b - a, 0.0)
        } else {
            // ∫ e^{ikθ} dθ = (e^{ikb} − e^{ika}) / (ik)
            (Complex64::from_polar(1.0, k * b) - Complex64::from_polar(1.0, k * a)) / Complex64::new(0.0, k)
        };
        let radial = (ln_gamma((n + m) as f64 / 2.0 + 1.0) - 0.5 * (ln_fact[n] + ln_fact[m])).exp() / 2.0;
        angular * radial / PI
    })
}

fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// The `2M` PSK sector POVM elements, cell `c` centred on phase `πc/M`.
pub fn psk_region_povm(m: usize, n_max: usize) -> Vec<CMatrix> {
    let w = PI / m as f64;
    (0..2 * m).map(|c| sector_povm((c as f64 - 0.5) * w, (c as f64 + 0.5) * w, n_max)).collect()
}

/// Eve's success with a quantized measurement: region POVM `cells`, then a
/// maximum-likelihood key decision per cell with ties counted as failures.
/// `states[r]` are single-slot coherent amplitudes.
pub fn quantized_success(states: &[Complex64], priors: &[f64], cells: &[CMatrix]) -> Result<f64> {
    validate_priors(priors)?;
    let n_max = cells[0].nrows() - 1;
    let vecs: Vec<CVector> = states
        .iter()
        .map(|&a| coherent_fock(a, n_max).map(|v| v.to_vector()))
        .collect::<Result<_>>()?;
    let mut success = 0.0;
    for e in cells {
        let probs: Vec<f64> = vecs.iter().map(|v| (v.adjoint() * e * v)[(0, 0)].re).collect();
        let weighted: Vec<f64> = probs.iter().zip(priors).map(|(q, p)| q * p).collect();
        let best = weighted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let winners = weighted.iter().filter(|&&w| w >= best - 1e-15).count();
        if winners == 1 {
            success += best;
        }
    }
    Ok(success)
}

/// `|⟨−α|α⟩|²` from explicit Fock vectors.
pub fn antipodal_overlap_sqr(alpha: Complex64) -> Result<f64> {
    let n = min_cutoff(alpha);
    let a = coherent_fock(alpha, n)?;
    let b = coherent_fock(-alpha, n)?;
    Ok(b.inner(&a).norm_sqr())
}

/// Identity matrix helper for callers building measurements by hand.
pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// Rank-one projectors onto the computational basis.
pub fn basis_projectors(d: usize) -> MeasurementSet {
    MeasurementSet {
        ops: (0..d)
            .map(|i| CMatrix::from_fn(d, d, |a, b| if a == i && b == i { ONE } else { ZERO }))
            .collect(),
    }
}
