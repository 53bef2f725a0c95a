//! The resolved evolved-QBM state, its averaging channels, the tent-density
//! time sampler and canonical purifications.

use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{self, thermal_from_eig, EigSystem, Thermal};
use crate::pauli::{assemble_dense, Model};
use crate::quadrature::{gauss_legendre_on, tent_density};
use crate::{contract, CMat, CVec, Complex64, Result};

/// Below this gap the channel factors switch to their Taylor series.
const SERIES_GAP: f64 = 1e-6;

/// Φ factor tanh(Δ/2)/(Δ/2).
pub fn tent_factor(delta: f64) -> f64 {
    if delta.abs() < SERIES_GAP {
        1.0 - delta * delta / 12.0
    } else {
        (delta / 2.0).tanh() / (delta / 2.0)
    }
}

/// Ψ factor (1 − e^{−iΔ})/(iΔ) = ∫₀¹ e^{−iΔt} dt.
pub fn unit_factor(delta: f64) -> Complex64 {
    if delta.abs() < SERIES_GAP {
        Complex64::new(1.0 - delta * delta / 6.0, -delta / 2.0)
    } else {
        (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -delta)) / Complex64::new(0.0, delta)
    }
}

/// Dense terms of a model, built once and shared by every resolved state.
#[derive(Debug, Clone)]
pub struct DenseModel {
    pub model: Model,
    pub g_terms: Vec<CMat>,
    pub h_terms: Vec<CMat>,
}

impl DenseModel {
    pub fn new(model: Model) -> Arc<Self> {
        Arc::new(DenseModel {
            g_terms: model.g.dense_terms(),
            h_terms: model.h.dense_terms(),
            model,
        })
    }

    pub fn dim(&self) -> usize {
        1 << self.model.n_qubits()
    }

    pub fn j(&self) -> usize {
        self.g_terms.len()
    }

    pub fn k(&self) -> usize {
        self.h_terms.len()
    }

    pub fn g_matrix(&self, theta: &[f64]) -> Result<CMat> {
        assemble_dense(self.dim(), &self.g_terms, theta)
    }

    pub fn h_matrix(&self, phi: &[f64]) -> Result<CMat> {
        assemble_dense(self.dim(), &self.h_terms, phi)
    }
}

/// ω(θ,φ) together with the spectral data every formula reuses.
#[derive(Debug, Clone)]
pub struct EqbmState {
    model: Arc<DenseModel>,
    theta: Vec<f64>,
    phi: Vec<f64>,
    g: CMat,
    h: CMat,
    thermal: Thermal,
    eig_h: EigSystem,
    u: CMat,
    omega: CMat,
    sqrt_rho: CMat,
    g_means: Vec<f64>,
}

/// Resolves the state at (θ, φ).
pub fn resolve(model: &Arc<DenseModel>, theta: &[f64], phi: &[f64]) -> Result<EqbmState> {
    EqbmState::new(model, theta, phi)
}

impl EqbmState {
    pub fn new(model: &Arc<DenseModel>, theta: &[f64], phi: &[f64]) -> Result<Self> {
        let g = model.g_matrix(theta)?;
        let h = model.h_matrix(phi)?;
        if theta.iter().chain(phi).any(|x| !x.is_finite()) {
            return Err(crate::Error::Domain("non-finite parameter".into()));
        }
        let thermal = thermal_from_eig(linalg::eigh(&g)?);
        let eig_h = linalg::eigh(&h)?;
        let u = eig_h.evolution(1.0);
        let omega = linalg::conjugate(&u, &thermal.rho);
        let sqrt_rho = thermal.eig.func_real(|w| {
            let w_min = thermal.eig.values[0];
            (-(w - w_min) / 2.0).exp()
        })? * Complex64::new((-(thermal.ln_z + thermal.eig.values[0]) / 2.0).exp(), 0.0);
        let g_means = model
            .g_terms
            .iter()
            .map(|gj| linalg::expect(gj, &thermal.rho).re)
            .collect();
        Ok(EqbmState {
            model: Arc::clone(model),
            theta: theta.to_vec(),
            phi: phi.to_vec(),
            g,
            h,
            thermal,
            eig_h,
            u,
            omega,
            sqrt_rho,
            g_means,
        })
    }

    pub fn model(&self) -> &Arc<DenseModel> {
        &self.model
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn j(&self) -> usize {
        self.theta.len()
    }

    pub fn k(&self) -> usize {
        self.phi.len()
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn g(&self) -> &CMat {
        &self.g
    }

    pub fn h(&self) -> &CMat {
        &self.h
    }

    pub fn g_term(&self, j: usize) -> &CMat {
        &self.model.g_terms[j]
    }

    pub fn h_term(&self, k: usize) -> &CMat {
        &self.model.h_terms[k]
    }

    pub fn eig_g(&self) -> &EigSystem {
        &self.thermal.eig
    }

    pub fn eig_h(&self) -> &EigSystem {
        &self.eig_h
    }

    pub fn rho(&self) -> &CMat {
        &self.thermal.rho
    }

    pub fn sqrt_rho(&self) -> &CMat {
        &self.sqrt_rho
    }

    /// Eigenvalues of ρ (and ω), paired with the columns of `eig_g().vectors`.
    pub fn probs(&self) -> &[f64] {
        &self.thermal.probs
    }

    pub fn z(&self) -> f64 {
        self.thermal.z
    }

    pub fn ln_z(&self) -> f64 {
        self.thermal.ln_z
    }

    /// e^{−iH(φ)}.
    pub fn u(&self) -> &CMat {
        &self.u
    }

    pub fn omega(&self) -> &CMat {
        &self.omega
    }

    /// Eigenvectors of ω, paired with `probs()`.
    pub fn omega_vectors(&self) -> CMat {
        &self.u * &self.thermal.eig.vectors
    }

    /// ⟨G_j⟩_ρ for every generator term.
    pub fn g_means(&self) -> &[f64] {
        &self.g_means
    }

    /// √ω = U √ρ U†.
    pub fn sqrt_omega(&self) -> CMat {
        linalg::conjugate(&self.u, &self.sqrt_rho)
    }

    fn check_dim(&self, x: &CMat) -> Result<()> {
        if x.nrows() != self.dim() || x.ncols() != self.dim() {
            return contract(format!(
                "operator is {}x{} but the state has dimension {}",
                x.nrows(),
                x.ncols(),
                self.dim()
            ));
        }
        Ok(())
    }

    /// Φ_θ(X) = ∫ p(t) e^{−iGt} X e^{iGt} dt, or Φ_{θ/2} when `half` is set.
    pub fn phi_channel(&self, x: &CMat, half: bool) -> Result<CMat> {
        self.check_dim(x)?;
        let s = if half { 0.5 } else { 1.0 };
        let e = &self.thermal.eig;
        let mut y = e.to_eigenbasis(x);
        let n = self.dim();
        for k in 0..n {
            for l in 0..n {
                y[(k, l)] *= tent_factor(s * (e.values[k] - e.values[l]));
            }
        }
        Ok(e.from_eigenbasis(&y))
    }

    /// Ψ_φ(X) = ∫₀¹ e^{−iHt} X e^{iHt} dt, or its adjoint Ψ_φ†.
    pub fn psi_channel(&self, x: &CMat, adjoint: bool) -> Result<CMat> {
        self.check_dim(x)?;
        let e = &self.eig_h;
        let mut y = e.to_eigenbasis(x);
        let n = self.dim();
        for a in 0..n {
            for b in 0..n {
                let f = unit_factor(e.values[a] - e.values[b]);
                y[(a, b)] *= if adjoint { f.conj() } else { f };
            }
        }
        Ok(e.from_eigenbasis(&y))
    }

    /// e^{−iG(θ)t}; `scale` multiplies the generator (0.5 for G(θ/2)).
    pub fn g_evolution(&self, t: f64, scale: f64) -> CMat {
        self.thermal.eig.evolution(scale * t)
    }

    /// e^{−iH(φ)t}.
    pub fn h_evolution(&self, t: f64) -> CMat {
        self.eig_h.evolution(t)
    }

    /// (√σ ⊗ I)|Γ⟩ with σ = ω when `evolved`, else ρ.
    pub fn canonical_purification(&self, evolved: bool) -> CVec {
        let s = if evolved { self.sqrt_omega() } else { self.sqrt_rho.clone() };
        vectorize(&s)
    }
}

/// Row-major vectorization: component a·d + b is M_{ab}, i.e. (M ⊗ I)|Γ⟩.
pub fn vectorize(m: &CMat) -> CVec {
    let d = m.nrows();
    CVec::from_fn(d * d, |idx, _| m[(idx / d, idx % d)])
}

/// Tr₂ |ψ⟩⟨ψ| for a vector on two d-dimensional registers.
pub fn partial_trace_second(psi: &CVec, d: usize) -> CMat {
    CMat::from_fn(d, d, |a, c| (0..d).map(|b| psi[a * d + b] * psi[c * d + b].conj()).sum())
}

/// Inverse-CDF table for |t| under the tent density.
#[derive(Debug)]
pub struct HptTable {
    t: Vec<f64>,
    mass: Vec<f64>,
}

/// Truncation horizon of the sampler; the mass beyond it is below 1e−100.
pub const HPT_HORIZON: f64 = 100.0;

impl HptTable {
    fn build() -> Self {
        let mut t = vec![0.0];
        let lo = 1e-12f64;
        let n_inner = 4000;
        for i in 0..=n_inner {
            t.push(lo * (1.0 / lo).powf(i as f64 / n_inner as f64));
        }
        let n_outer = 2000;
        for i in 1..=n_outer {
            t.push(HPT_HORIZON.powf(i as f64 / n_outer as f64));
        }
        let mut mass = Vec::with_capacity(t.len());
        mass.push(0.0);
        // ∫_0^a p ≈ (2/π)·a·(1 − ln(πa/2)) for tiny a.
        let pi = std::f64::consts::PI;
        let mut acc = 2.0 * (2.0 / pi) * lo * (1.0 - (pi * lo / 2.0).ln());
        mass.push(acc);
        for w in t[1..].windows(2) {
            acc += 2.0 * gauss_legendre_on(w[0], w[1], 8).integrate(tent_density);
            mass.push(acc);
        }
        let total = acc;
        for m in &mut mass {
            *m /= total;
        }
        HptTable { t, mass }
    }

    /// Shared table, built on first use.
    pub fn get() -> &'static HptTable {
        static TABLE: OnceLock<HptTable> = OnceLock::new();
        TABLE.get_or_init(HptTable::build)
    }

    /// Grid of |t| values the table is built on.
    pub fn grid(&self) -> &[f64] {
        &self.t
    }

    /// P(|T| ≤ t) interpolated on the grid.
    pub fn half_cdf(&self, t: f64) -> f64 {
        let t = t.abs();
        if t >= HPT_HORIZON {
            return 1.0;
        }
        let i = self.t.partition_point(|&x| x <= t).max(1) - 1;
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let (m0, m1) = (self.mass[i], self.mass[i + 1]);
        m0 + (m1 - m0) * (t - t0) / (t1 - t0)
    }

    /// P(T ≤ t).
    pub fn cdf(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.5;
        }
        0.5 + 0.5 * t.signum() * self.half_cdf(t)
    }

    /// Maps u ∈ [0,1) to |t| by linear interpolation of the inverse CDF.
    pub fn magnitude(&self, u: f64) -> f64 {
        let i = self.mass.partition_point(|&m| m <= u).clamp(1, self.mass.len() - 1) - 1;
        let (m0, m1) = (self.mass[i], self.mass[i + 1]);
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        if m1 <= m0 {
            return t0;
        }
        t0 + (t1 - t0) * (u - m0) / (m1 - m0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let m = self.magnitude(u);
        if rng.random::<bool>() {
            m
        } else {
            -m
        }
    }
}

/// Draws t from the tent density with the given generator.
pub fn sample_hpt_with<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    HptTable::get().sample(rng)
}

/// Single-owner tent-density sampler.
#[derive(Debug, Clone)]
pub struct HptSampler {
    rng: ChaCha8Rng,
}

impl HptSampler {
    pub fn new(seed: u64) -> Self {
        HptSampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Sampler on stream `stream` of the root seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        HptSampler { rng }
    }

    pub fn sample(&mut self) -> f64 {
        HptTable::get().sample(&mut self.rng)
    }
}

pub fn sample_hpt(sampler: &mut HptSampler) -> f64 {
    sampler.sample()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::pauli::{random_model, ParamHamiltonian, Pauli};
    use crate::quadrature::{tent_rule, trapezoid};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    pub(crate) fn one_qubit(theta: f64, phi: f64) -> EqbmState {
        let model = Model::new(
            ParamHamiltonian::new(1, vec!["Z".parse().unwrap()]).unwrap(),
            ParamHamiltonian::new(1, vec!["X".parse().unwrap()]).unwrap(),
            vec![theta],
            vec![phi],
        )
        .unwrap();
        resolve(&DenseModel::new(model), &[theta], &[phi]).unwrap()
    }

    fn random_state(n: usize, seed: u64) -> EqbmState {
        crate::testutil::random_state(n, 3, 2, seed)
    }

    #[test]
    fn zero_phi_leaves_rho() {
        let m = random_model(2, 3, 2, 1.0, 4).unwrap();
        let t = m.theta.clone();
        let s = resolve(&DenseModel::new(m), &t, &[0.0, 0.0]).unwrap();
        assert_eq!(s.omega(), s.rho());
    }

    #[test]
    fn zero_theta_is_maximally_mixed() {
        let m = random_model(2, 3, 2, 1.0, 4).unwrap();
        let p = m.phi.clone();
        let s = resolve(&DenseModel::new(m), &[0.0; 3], &p).unwrap();
        assert!(max_abs_diff(s.omega(), &(CMat::identity(4, 4) * c(0.25))) < 1e-15);
    }

    #[test]
    fn one_qubit_direct_computation() {
        let s = one_qubit(0.5, 0.3);
        let x = Pauli::X.matrix();
        // e^{−0.3iX} = cos(0.3) I − i sin(0.3) X
        let u = CMat::identity(2, 2) * c(0.3f64.cos()) - x * Complex64::new(0.0, 0.3f64.sin());
        let z = (0.5f64).exp() + (-0.5f64).exp();
        let rho = CMat::from_diagonal(&nalgebra::dvector![c((-0.5f64).exp() / z), c(0.5f64.exp() / z)]);
        let omega = &u * rho * u.adjoint();
        assert!(max_abs_diff(s.omega(), &omega) < 1e-15);
        let spec = linalg::eigh(s.omega()).unwrap().values;
        assert!((spec[0] - (-0.5f64).exp() / z).abs() < 1e-12);
        assert!((spec[1] - 0.5f64.exp() / z).abs() < 1e-12);
    }

    #[test]
    fn state_invariants() {
        for seed in 0..10 {
            let s = random_state(2 + (seed % 2) as usize, seed);
            assert!((s.omega().trace().re - 1.0).abs() < 1e-12);
            let u = s.u();
            assert!(max_abs_diff(s.omega(), &linalg::conjugate(u, s.rho())) < 1e-10);
            let mut a = linalg::eigh(s.omega()).unwrap().values;
            let mut b = s.probs().to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10));
            assert!(max_abs_diff(&(s.sqrt_rho() * s.sqrt_rho()), s.rho()) < 1e-12);
        }
    }

    #[test]
    fn channel_factors_series_continuity() {
        for d in [1e-6 * 0.999, 1e-6 * 1.001, 3e-6] {
            assert!((tent_factor(d) - (1.0 - d * d / 12.0)).abs() < 1e-15);
            let exact = (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -d)) / Complex64::new(0.0, d);
            assert!((unit_factor(d) - exact).norm() < 1e-10);
        }
        assert_eq!(tent_factor(0.0), 1.0);
        assert_eq!(unit_factor(0.0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn phi_fixes_commuting_input() {
        let s = random_state(2, 1);
        let x = s.g().clone() * c(0.3) + CMat::identity(4, 4);
        assert!(max_abs_diff(&s.phi_channel(&x, false).unwrap(), &x) < 1e-13);
    }

    #[test]
    fn phi_on_x_under_z() {
        let s = one_qubit(1.0, 0.0);
        let out = s.phi_channel(&Pauli::X.matrix(), false).unwrap();
        let f = 1.0f64.tanh();
        assert!((out[(0, 1)].re - f).abs() < 1e-14 && (out[(1, 0)].re - f).abs() < 1e-14);
        assert!(out[(0, 0)].norm() < 1e-15);
        // Quadrature of cos(2t) against p(t): the off-diagonal phase is e^{∓2it}.
        let q = tent_rule().integrate(|t| (2.0 * t).cos());
        assert!((q - f).abs() < 1e-4);
    }

    #[test]
    fn phi_half_flag_equals_halved_theta() {
        let m = random_model(2, 3, 2, 1.0, 8).unwrap();
        let (t, p) = (m.theta.clone(), m.phi.clone());
        let dm = DenseModel::new(m);
        let full = resolve(&dm, &t, &p).unwrap();
        let th: Vec<f64> = t.iter().map(|x| x / 2.0).collect();
        let halved = resolve(&dm, &th, &p).unwrap();
        let x = full.g_term(1).clone();
        let a = full.phi_channel(&x, true).unwrap();
        let b = halved.phi_channel(&x, false).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn psi_fixes_commuting_input_and_generator() {
        let s = random_state(2, 2);
        let h = s.h().clone();
        assert!(max_abs_diff(&s.psi_channel(&h, false).unwrap(), &h) < 1e-13);
        let id = CMat::identity(4, 4);
        assert!(max_abs_diff(&s.psi_channel(&id, false).unwrap(), &id) < 1e-13);
    }

    #[test]
    fn psi_matches_trapezoid() {
        let s = one_qubit(0.2, 1.0);
        let z = Pauli::Z.matrix();
        let out = s.psi_channel(&z, false).unwrap();
        for (r, col) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let re = trapezoid(0.0, 1.0, 10_000, |t| {
                let v = s.h_evolution(t);
                (&v * &z * v.adjoint())[(r, col)].re
            });
            let im = trapezoid(0.0, 1.0, 10_000, |t| {
                let v = s.h_evolution(t);
                (&v * &z * v.adjoint())[(r, col)].im
            });
            assert!((out[(r, col)] - Complex64::new(re, im)).norm() < 1e-6);
        }
    }

    #[test]
    fn channels_trace_preserving_and_hermitian() {
        let s = random_state(3, 5);
        let x = crate::testutil::random_hermitian(8, 77);
        for out in [
            s.phi_channel(&x, false).unwrap(),
            s.phi_channel(&x, true).unwrap(),
            s.psi_channel(&x, false).unwrap(),
            s.psi_channel(&x, true).unwrap(),
        ] {
            assert!((out.trace() - x.trace()).norm() < 1e-10);
            assert!(linalg::hermitian_asymmetry(&out) < 1e-12);
        }
    }

    #[test]
    fn channel_dimension_mismatch() {
        let s = random_state(2, 5);
        assert!(s.phi_channel(&CMat::identity(2, 2), false).is_err());
        assert!(s.psi_channel(&CMat::identity(8, 8), true).is_err());
    }

    #[test]
    fn purification_of_maximally_mixed() {
        let s = one_qubit(0.0, 0.7);
        let psi = s.canonical_purification(true);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [r, 0.0, 0.0, r];
        for (a, b) in psi.iter().zip(expected) {
            assert!((a - c(b)).norm() < 1e-15);
        }
    }

    #[test]
    fn purification_of_nearly_pure_state() {
        let s = one_qubit(20.0, 0.0);
        let psi = s.canonical_purification(false);
        // G = 20 Z favours |1⟩, so the purification approaches |11⟩.
        assert!((psi[3].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn purification_partial_trace() {
        for evolved in [false, true] {
            let s = random_state(2, 12);
            let psi = s.canonical_purification(evolved);
            assert!((psi.norm() - 1.0).abs() < 1e-12);
            let target = if evolved { s.omega() } else { s.rho() };
            assert!(max_abs_diff(&partial_trace_second(&psi, 4), target) < 1e-10);
        }
    }

    #[test]
    fn purification_is_thermofield_double() {
        let s = random_state(2, 13);
        let psi = s.canonical_purification(false);
        let v = &s.eig_g().vectors;
        let d = s.dim();
        let mut tfd = CVec::zeros(d * d);
        for k in 0..d {
            let amp = (-s.eig_g().values[k] / 2.0).exp() / s.z().sqrt();
            for a in 0..d {
                for b in 0..d {
                    tfd[a * d + b] += c(amp) * v[(a, k)] * v[(b, k)].conj();
                }
            }
        }
        assert!((psi - tfd).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn hpt_cdf_shape() {
        let t = HptTable::get();
        assert_eq!(t.cdf(0.0), 0.5);
        assert!(t.mass.windows(2).all(|w| w[0] <= w[1]));
        assert!((t.half_cdf(HPT_HORIZON) - 1.0).abs() < 1e-15);
        assert!((t.cdf(1.3) + t.cdf(-1.3) - 1.0).abs() < 1e-15);
        // Exact half-line mass at t = 1 from the tent rule.
        let exact: f64 = tent_rule()
            .nodes
            .iter()
            .zip(&tent_rule().weights)
            .filter(|(x, _)| x.abs() <= 1.0)
            .map(|(_, w)| w)
            .sum();
        assert!((t.half_cdf(1.0) - exact).abs() < 1e-3);
    }

    #[test]
    fn hpt_characteristic_function() {
        let mut s = HptSampler::new(2024);
        let n = 1_000_000;
        let samples: Vec<f64> = (0..n).map(|_| s.sample()).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!(mean.abs() < 5.0 * (var / n as f64).sqrt());
        for d in [0.5, 1.0, 2.0, 4.0] {
            let (mut re, mut im, mut sq) = (0.0, 0.0, 0.0);
            for &t in &samples {
                let (sn, cs) = (d * t).sin_cos();
                re += cs;
                im -= sn;
                sq += cs * cs;
            }
            let re = re / n as f64;
            let im = im / n as f64;
            let se_re = ((sq / n as f64 - re * re) / n as f64).sqrt();
            let se_im = (((1.0 - sq / n as f64) - im * im) / n as f64).sqrt();
            let exact = (d / 2.0f64).tanh() / (d / 2.0);
            assert!((re - exact).abs() < 3.0 * se_re, "Δ={d}: {re} vs {exact} (se {se_re})");
            assert!(im.abs() < 3.0 * se_im, "Δ={d}: imaginary {im}");
        }
    }

    #[test]
    fn hpt_streams_are_reproducible() {
        let a: Vec<f64> = {
            let mut s = HptSampler::with_stream(5, 3);
            (0..10).map(|_| s.sample()).collect()
        };
        let b: Vec<f64> = {
            let mut s = HptSampler::with_stream(5, 3);
            (0..10).map(|_| s.sample()).collect()
        };
        let other: Vec<f64> = {
            let mut s = HptSampler::with_stream(5, 4);
            (0..10).map(|_| s.sample()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, other);
    }
}
