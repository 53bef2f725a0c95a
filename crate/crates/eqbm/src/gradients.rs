//! State derivatives and objective gradients.
//!
//! Ground-state energy estimation minimizes Tr[O ω(θ,φ)]. Generative
//! modelling minimizes the relative entropy D(η‖ω(θ,φ)) to a positive
//! definite target η, evaluated as
//!
//! ```text
//! D = Tr[η ln η] + Tr[G(θ) η(φ)] + ln Z(θ),   η(φ) = e^{iH(φ)} η e^{−iH(φ)}.
//! ```

use crate::linalg::{self, acomm, comm, expect, real_part};
use crate::state::EqbmState;
use crate::{contract, CMat, Complex64, Error, Result};

/// Tolerance on imaginary residues of traces that are real in exact arithmetic.
pub const IMAG_TOL: f64 = 1e-10;

/// A coordinate of γ = (θ, φ).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Theta(usize),
    Phi(usize),
}

impl Param {
    /// Position in the concatenated vector (θ₁..θ_J, φ₁..φ_K).
    pub fn flat_index(self, j: usize) -> usize {
        match self {
            Param::Theta(i) => i,
            Param::Phi(k) => j + k,
        }
    }

    pub fn from_flat(idx: usize, j: usize) -> Param {
        if idx < j {
            Param::Theta(idx)
        } else {
            Param::Phi(idx - j)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradVector {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl GradVector {
    pub fn zeros(j: usize, k: usize) -> Self {
        GradVector { theta: vec![0.0; j], phi: vec![0.0; k] }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.theta.iter().chain(&self.phi).copied().collect()
    }

    pub fn from_slice(v: &[f64], j: usize) -> Self {
        GradVector { theta: v[..j].to_vec(), phi: v[j..].to_vec() }
    }

    pub fn norm(&self) -> f64 {
        self.theta.iter().chain(&self.phi).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::Theta(i) => self.theta[i],
            Param::Phi(k) => self.phi[k],
        }
    }

    fn check_finite(self) -> Result<Self> {
        if self.theta.iter().chain(&self.phi).all(|x| x.is_finite()) {
            Ok(self)
        } else {
            Err(Error::Domain("gradient has non-finite entries".into()))
        }
    }
}

fn check_param(state: &EqbmState, p: Param) -> Result<()> {
    match p {
        Param::Theta(i) if i >= state.j() => contract(format!("θ index {i} out of range (J = {})", state.j())),
        Param::Phi(k) if k >= state.k() => contract(format!("φ index {k} out of range (K = {})", state.k())),
        _ => Ok(()),
    }
}

fn check_observable(state: &EqbmState, o: &CMat) -> Result<()> {
    if o.nrows() != state.dim() || o.ncols() != state.dim() {
        return contract("observable dimension does not match the state");
    }
    linalg::check_hermitian(o)
}

/// ∂ω/∂γ for one coordinate.
///
/// θ_j: −½{e^{−iH} Φ_θ(G_j) e^{iH}, ω} + ω⟨G_j⟩_ρ.
/// φ_k: i[ω, Ψ_φ(H_k)].
pub fn d_omega(state: &EqbmState, which: Param) -> Result<CMat> {
    check_param(state, which)?;
    let omega = state.omega();
    match which {
        Param::Theta(j) => {
            let a = linalg::conjugate(state.u(), &state.phi_channel(state.g_term(j), false)?);
            Ok(acomm(&a, omega) * Complex64::new(-0.5, 0.0) + omega * Complex64::new(state.g_means()[j], 0.0))
        }
        Param::Phi(k) => {
            let b = state.psi_channel(state.h_term(k), false)?;
            Ok(comm(omega, &b) * Complex64::new(0.0, 1.0))
        }
    }
}

/// Tr[O ω].
pub fn gsee_value(state: &EqbmState, o: &CMat) -> Result<f64> {
    check_observable(state, o)?;
    real_part(expect(o, state.omega()), IMAG_TOL)
}

/// Gradient of Tr[O ω(θ,φ)].
pub fn gsee_grad(state: &EqbmState, o: &CMat) -> Result<GradVector> {
    check_observable(state, o)?;
    let rho = state.rho();
    let o_heis = linalg::conjugate(&state.u().adjoint(), o);
    let o_mean = real_part(expect(o, state.omega()), IMAG_TOL)?;
    let mut g = GradVector::zeros(state.j(), state.k());
    for j in 0..state.j() {
        let phi_g = state.phi_channel(state.g_term(j), false)?;
        let first = real_part(expect(&acomm(&o_heis, &phi_g), rho), IMAG_TOL)?;
        g.theta[j] = -0.5 * first + o_mean * state.g_means()[j];
    }
    for k in 0..state.k() {
        let psi_h = state.psi_channel(state.h_term(k), false)?;
        let z = expect(&comm(&psi_h, o), state.omega()) * Complex64::new(0.0, 1.0);
        g.phi[k] = real_part(z, IMAG_TOL)?;
    }
    g.check_finite()
}

/// Positive definite target state for generative modelling.
#[derive(Debug, Clone)]
pub struct GenModTarget {
    eta: CMat,
    tr_eta_ln_eta: f64,
}

/// Smallest eigenvalue a target may have.
pub const TARGET_MIN_EIG: f64 = 1e-12;

impl GenModTarget {
    pub fn new(eta: CMat) -> Result<Self> {
        let e = linalg::eigh(&eta)?;
        let tr: f64 = e.values.iter().sum();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("target trace is {tr}, expected 1")));
        }
        let min = e.values.first().copied().unwrap_or(0.0);
        if min <= TARGET_MIN_EIG {
            return Err(Error::Domain(format!(
                "target must be positive definite (min eigenvalue {min:e})"
            )));
        }
        let tr_eta_ln_eta = e.values.iter().map(|&l| l * l.ln()).sum();
        Ok(GenModTarget { eta, tr_eta_ln_eta })
    }

    /// Thermal state e^{−K}/Tr e^{−K} of a Hermitian K.
    pub fn thermal(k: &CMat) -> Result<Self> {
        Self::new(linalg::thermal(k)?.rho)
    }

    pub fn eta(&self) -> &CMat {
        &self.eta
    }

    pub fn tr_eta_ln_eta(&self) -> f64 {
        self.tr_eta_ln_eta
    }

    /// η(φ) = e^{iH(φ)} η e^{−iH(φ)} for the state's φ.
    pub fn evolved(&self, state: &EqbmState) -> Result<CMat> {
        if self.eta.nrows() != state.dim() {
            return contract("target dimension does not match the state");
        }
        Ok(linalg::conjugate(&state.u().adjoint(), &self.eta))
    }
}

/// D(η‖ω(θ,φ)) = Tr[η ln η] + Tr[G(θ) η(φ)] + ln Z(θ).
pub fn relent_value(state: &EqbmState, target: &GenModTarget) -> Result<f64> {
    let eta_phi = target.evolved(state)?;
    let energy = real_part(expect(state.g(), &eta_phi), IMAG_TOL)?;
    Ok(target.tr_eta_ln_eta() + energy + state.ln_z())
}

/// Gradient of D(η‖ω(θ,φ)).
///
/// θ_j: ⟨G_j⟩_{η(φ)} − ⟨G_j⟩_ρ.  φ_k: i⟨[G(θ), Ψ_φ†(H_k)]⟩_{η(φ)}.
pub fn genmod_grad(state: &EqbmState, target: &GenModTarget) -> Result<GradVector> {
    let eta_phi = target.evolved(state)?;
    let mut g = GradVector::zeros(state.j(), state.k());
    for j in 0..state.j() {
        g.theta[j] = real_part(expect(state.g_term(j), &eta_phi), IMAG_TOL)? - state.g_means()[j];
    }
    for k in 0..state.k() {
        let psi_h = state.psi_channel(state.h_term(k), true)?;
        let z = expect(&comm(state.g(), &psi_h), &eta_phi) * Complex64::new(0.0, 1.0);
        g.phi[k] = real_part(z, IMAG_TOL)?;
    }
    g.check_finite()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::oracle::{central_difference, divergence, DivergenceKind};
    use crate::pauli::{random_model, Model, ParamHamiltonian};
    use crate::state::{resolve, DenseModel};
    use crate::testutil::random_hermitian;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn model_from(n: usize, g: &[&str], h: &[&str]) -> Arc<DenseModel> {
        let gh = ParamHamiltonian::new(n, g.iter().map(|s| s.parse().unwrap()).collect()).unwrap();
        let hh = ParamHamiltonian::new(n, h.iter().map(|s| s.parse().unwrap()).collect()).unwrap();
        let m = Model::new(gh, hh, vec![0.0; g.len()], vec![0.0; h.len()]).unwrap();
        DenseModel::new(m)
    }

    fn random(seed: u64) -> (Arc<DenseModel>, Vec<f64>, Vec<f64>) {
        let n = 1 + (seed % 3) as usize;
        let max_terms = if n == 1 { 1 } else { 4 };
        let j = 1 + (seed as usize / 3) % max_terms;
        let k = 1 + (seed as usize / 5) % max_terms;
        let j = if n == 1 { 1 + (seed as usize % 2) } else { j };
        let m = random_model(n, j, k, 1.0, 100 + seed).unwrap();
        let (t, p) = (m.theta.clone(), m.phi.clone());
        (DenseModel::new(m), t, p)
    }

    fn thermal_target(dim: usize, seed: u64) -> GenModTarget {
        GenModTarget::thermal(&random_hermitian(dim, seed)).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        let d = (a - b).abs();
        if b.abs() < 1e-2 {
            d < 1e-8
        } else {
            d / b.abs() < 1e-6
        }
    }

    #[test]
    fn d_omega_at_maximally_mixed_point() {
        let dm = model_from(2, &["XZ", "YI"], &["ZZ"]);
        let s = resolve(&dm, &[0.0, 0.0], &[0.4]).unwrap();
        for j in 0..2 {
            let d = d_omega(&s, Param::Theta(j)).unwrap();
            let rotated = linalg::conjugate(s.u(), s.g_term(j));
            assert!(max_abs_diff(&d, &(rotated * c(-0.25))) < 1e-14);
        }
    }

    #[test]
    fn d_omega_vanishes_for_commuting_evolution() {
        let dm = model_from(2, &["ZI", "IZ"], &["ZZ", "ZI"]);
        let s = resolve(&dm, &[0.3, -0.7], &[0.9, 0.2]).unwrap();
        for k in 0..2 {
            assert!(linalg::max_abs(&d_omega(&s, Param::Phi(k)).unwrap()) < 1e-15);
        }
        let o = crate::pauli::PauliSum::parse("ZZ + 0.5*IZ").unwrap().dense();
        let g = gsee_grad(&s, &o).unwrap();
        assert!(g.phi.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn d_omega_matches_finite_differences() {
        for seed in 0..20 {
            let (dm, t, p) = random(seed);
            let s = resolve(&dm, &t, &p).unwrap();
            let j = t.len();
            for idx in 0..j + p.len() {
                let which = Param::from_flat(idx, j);
                let h = 1e-5;
                let shifted = |sign: f64| {
                    let mut tt = t.clone();
                    let mut pp = p.clone();
                    match which {
                        Param::Theta(i) => tt[i] += sign * h,
                        Param::Phi(k) => pp[k] += sign * h,
                    }
                    resolve(&dm, &tt, &pp).unwrap().omega().clone()
                };
                let fd = (shifted(1.0) - shifted(-1.0)) / c(2.0 * h);
                let an = d_omega(&s, which).unwrap();
                assert!(max_abs_diff(&fd, &an) < 1e-7, "seed {seed} {which:?}");
                assert!(an.trace().norm() < 1e-10);
                assert!(max_abs_diff(&an, &an.adjoint()) < 1e-12, "seed {seed} {which:?}");
            }
        }
    }

    #[test]
    fn d_omega_index_out_of_range() {
        let (dm, t, p) = random(1);
        let s = resolve(&dm, &t, &p).unwrap();
        assert!(matches!(d_omega(&s, Param::Theta(t.len())), Err(Error::Contract(_))));
        assert!(matches!(d_omega(&s, Param::Phi(p.len())), Err(Error::Contract(_))));
    }

    #[test]
    fn gsee_value_simple_cases() {
        let (dm, t, p) = random(4);
        let s = resolve(&dm, &t, &p).unwrap();
        let d = s.dim();
        assert!((gsee_value(&s, &CMat::identity(d, d)).unwrap() - 1.0).abs() < 1e-14);
        let zero = resolve(&dm, &vec![0.0; t.len()], &p).unwrap();
        let z = crate::pauli::PauliString::identity(dm.model.n_qubits()).unwrap();
        let mut letters = z.letters().to_vec();
        letters[0] = crate::pauli::Pauli::Z;
        let zop = crate::pauli::PauliString::new(letters).unwrap().dense();
        assert!(gsee_value(&zero, &zop).unwrap().abs() < 1e-15);
    }

    #[test]
    fn thermal_energy_is_log_partition_derivative() {
        let (dm, t, p) = random(7);
        let s = resolve(&dm, &t, &vec![0.0; p.len()]).unwrap();
        let energy = gsee_value(&s, s.g()).unwrap();
        let ln_z = |beta: f64| {
            let tt: Vec<f64> = t.iter().map(|x| beta * x).collect();
            resolve(&dm, &tt, &vec![0.0; p.len()]).unwrap().ln_z()
        };
        let h = 1e-5;
        let d = (ln_z(1.0 + h) - ln_z(1.0 - h)) / (2.0 * h);
        assert!((energy + d).abs() < 1e-8);
    }

    #[test]
    fn gsee_grad_matches_chain_rule_and_fd() {
        for seed in 0..20 {
            let (dm, t, p) = random(seed);
            let s = resolve(&dm, &t, &p).unwrap();
            let o = random_hermitian(s.dim(), 500 + seed);
            let g = gsee_grad(&s, &o).unwrap();
            for j in 0..t.len() {
                let chain = expect(&o, &d_omega(&s, Param::Theta(j)).unwrap()).re;
                assert!((chain - g.theta[j]).abs() < 1e-10);
            }
            let gamma: Vec<f64> = t.iter().chain(&p).copied().collect();
            let f = |x: &[f64]| {
                let st = resolve(&dm, &x[..t.len()], &x[t.len()..])?;
                gsee_value(&st, &o)
            };
            let fd = central_difference(f, &gamma, 1e-5, false).unwrap();
            for (a, b) in g.to_vec().iter().zip(&fd) {
                assert!(close(*a, *b), "seed {seed}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn relent_faithful_cases() {
        let (dm, t, p) = random(10);
        let s = resolve(&dm, &t, &p).unwrap();
        let tgt = GenModTarget::new(s.omega().clone()).unwrap();
        assert!(relent_value(&s, &tgt).unwrap().abs() < 1e-9);
        let g = genmod_grad(&s, &tgt).unwrap();
        assert!(g.norm() < 1e-9);

        let zero = resolve(&dm, &vec![0.0; t.len()], &p).unwrap();
        let d = zero.dim();
        let mixed = GenModTarget::new(CMat::identity(d, d) / c(d as f64)).unwrap();
        assert!(relent_value(&zero, &mixed).unwrap().abs() < 1e-12);
    }

    #[test]
    fn relent_matches_direct_definition() {
        for seed in 0..10 {
            let (dm, t, p) = random(seed);
            let s = resolve(&dm, &t, &p).unwrap();
            let tgt = thermal_target(s.dim(), 900 + seed);
            let via_energy = relent_value(&s, &tgt).unwrap();
            let direct = divergence(DivergenceKind::RelEnt, tgt.eta(), s.omega()).unwrap();
            assert!((via_energy - direct).abs() < 1e-8);
            assert!(via_energy > -1e-9);
            // Unitary invariance: D(η‖ω) = D(η(φ)‖ρ).
            let rotated = divergence(DivergenceKind::RelEnt, &tgt.evolved(&s).unwrap(), s.rho()).unwrap();
            assert!((via_energy - rotated).abs() < 1e-9);
        }
    }

    #[test]
    fn target_must_be_positive_definite() {
        let pure = CMat::from_diagonal(&nalgebra::dvector![c(1.0), c(0.0)]);
        assert!(matches!(GenModTarget::new(pure), Err(Error::Domain(_))));
        let unnormalized = CMat::identity(2, 2);
        assert!(matches!(GenModTarget::new(unnormalized), Err(Error::Domain(_))));
    }

    #[test]
    fn genmod_grad_matches_fd() {
        for seed in 0..20 {
            let (dm, t, p) = random(seed);
            let s = resolve(&dm, &t, &p).unwrap();
            let tgt = thermal_target(s.dim(), 300 + seed);
            let g = genmod_grad(&s, &tgt).unwrap();
            let gamma: Vec<f64> = t.iter().chain(&p).copied().collect();
            let f = |x: &[f64]| {
                let st = resolve(&dm, &x[..t.len()], &x[t.len()..])?;
                relent_value(&st, &tgt)
            };
            let fd = central_difference(f, &gamma, 1e-5, false).unwrap();
            for (a, b) in g.to_vec().iter().zip(&fd) {
                assert!(close(*a, *b), "seed {seed}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn classical_moment_matching() {
        let dm = model_from(2, &["ZI", "IZ", "ZZ"], &["XI"]);
        let s = resolve(&dm, &[0.3, -0.4, 0.8], &[0.0]).unwrap();
        let tgt = thermal_target(4, 77);
        let g = genmod_grad(&s, &tgt).unwrap();
        for j in 0..3 {
            let eta_mean = expect(s.g_term(j), tgt.eta()).re;
            let rho_mean = expect(s.g_term(j), s.rho()).re;
            assert!((g.theta[j] - (eta_mean - rho_mean)).abs() < 1e-14);
        }
    }

    #[test]
    fn relent_is_convex_in_theta() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for seed in 0..10 {
            let (dm, t, p) = random(seed);
            let tgt = thermal_target(dm.dim(), 40 + seed);
            let a: Vec<f64> = t.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
            let b: Vec<f64> = t.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let d = |x: &[f64]| relent_value(&resolve(&dm, x, &p).unwrap(), &tgt).unwrap();
            assert!(d(&mid) <= 0.5 * (d(&a) + d(&b)) + 1e-9);
        }
    }
}
