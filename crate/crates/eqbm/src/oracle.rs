//! Reference computations used to check the analytical formulas.
//!
//! Nothing here reuses the closed-form information matrices: the spectral
//! form works from ∂ω in the eigenbasis of ω, the Hessians difference the
//! divergences directly, and the pure-state formula differentiates a vector.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::gradients::{d_omega, Param};
use crate::info::{InfoKind, InfoMatrix};
use crate::linalg::{self, eigh, tr_prod};
use crate::state::{resolve, vectorize, DenseModel, EqbmState};
use crate::{contract, CMat, CVec, Complex64, Error, RMat, Result};

/// Smallest eigenvalue accepted as positive definite.
pub const PD_FLOOR: f64 = 0.0;
/// Relative gap below which the KM weight takes its limiting value.
pub const KM_GAP: f64 = 1e-9;
/// Default step for finite-difference Hessians.
pub const DEFAULT_HESSIAN_STEP: f64 = 1e-3;
/// Step for finite differences of state vectors.
pub const VECTOR_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceKind {
    /// Tr[ω ln ω] − Tr[ω ln τ].
    RelEnt,
    /// −2 ln F with F = ‖√ω√τ‖₁².
    Uhlmann,
    /// −2 ln F_H with F_H = (Tr[√ω√τ])².
    Holevo,
}

impl DivergenceKind {
    /// Divergence whose Hessian at coinciding arguments gives `kind`.
    pub fn for_info(kind: InfoKind) -> Self {
        match kind {
            InfoKind::Fb => DivergenceKind::Uhlmann,
            InfoKind::Wy => DivergenceKind::Holevo,
            InfoKind::Km => DivergenceKind::RelEnt,
        }
    }
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DivergenceKind::RelEnt => "relent",
            DivergenceKind::Uhlmann => "uhlmann",
            DivergenceKind::Holevo => "holevo",
        })
    }
}

impl FromStr for DivergenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relent" => Ok(DivergenceKind::RelEnt),
            "uhlmann" | "-2lnf" => Ok(DivergenceKind::Uhlmann),
            "holevo" | "-2lnfh" => Ok(DivergenceKind::Holevo),
            _ => contract(format!("unknown divergence {s:?}")),
        }
    }
}

/// Eigendecomposition of a density matrix with a positivity check.
struct Density {
    eig: linalg::EigSystem,
}

impl Density {
    fn new(m: &CMat, name: &str) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return contract(format!("{name} must be a nonempty square matrix"));
        }
        let eig = eigh(m)?;
        let min = eig.values[0];
        if min <= PD_FLOOR {
            return Err(Error::Domain(format!("{name} is not positive definite (min eigenvalue {min:e})")));
        }
        Ok(Density { eig })
    }

    fn sqrt(&self) -> Result<CMat> {
        self.eig.func_real(f64::sqrt)
    }

    fn ln(&self) -> Result<CMat> {
        self.eig.func_real(f64::ln)
    }
}

/// Uhlmann fidelity ‖√ω√τ‖₁², via the singular values of √ω√τ.
pub fn fidelity(omega: &CMat, tau: &CMat) -> Result<f64> {
    let (a, b) = (Density::new(omega, "ω")?, Density::new(tau, "τ")?);
    uhlmann_from_roots(&a.sqrt()?, &b.sqrt()?)
}

/// Holevo just-as-good fidelity (Tr[√ω√τ])².
pub fn holevo_fidelity(omega: &CMat, tau: &CMat) -> Result<f64> {
    let (a, b) = (Density::new(omega, "ω")?, Density::new(tau, "τ")?);
    holevo_from_roots(&a.sqrt()?, &b.sqrt()?)
}

fn uhlmann_from_roots(sa: &CMat, sb: &CMat) -> Result<f64> {
    let s: f64 = (sa * sb).singular_values().iter().sum();
    Ok(s * s)
}

fn holevo_from_roots(sa: &CMat, sb: &CMat) -> Result<f64> {
    let t = linalg::real_part(tr_prod(sa, sb), 1e-10)?;
    Ok(t * t)
}

/// D(ω‖τ) for positive definite density matrices.
pub fn divergence(kind: DivergenceKind, omega: &CMat, tau: &CMat) -> Result<f64> {
    if omega.shape() != tau.shape() {
        return contract("ω and τ have different dimensions");
    }
    let (a, b) = (Density::new(omega, "ω")?, Density::new(tau, "τ")?);
    let v = match kind {
        DivergenceKind::RelEnt => {
            let diff = a.ln()? - b.ln()?;
            linalg::real_part(tr_prod(omega, &diff), 1e-10)?
        }
        DivergenceKind::Uhlmann => -2.0 * uhlmann_from_roots(&a.sqrt()?, &b.sqrt()?)?.ln(),
        DivergenceKind::Holevo => -2.0 * holevo_from_roots(&a.sqrt()?, &b.sqrt()?)?.ln(),
    };
    if !v.is_finite() {
        return Err(Error::Domain(format!("{kind} divergence is not finite")));
    }
    Ok(v)
}

/// Central differences of a scalar function, optionally with one Richardson step.
pub fn central_difference(
    f: impl Fn(&[f64]) -> Result<f64>,
    x: &[f64],
    h: f64,
    richardson: bool,
) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return contract(format!("step must be positive, got {h}"));
    }
    let mut y = x.to_vec();
    let mut diff = |i: usize, h: f64| -> Result<f64> {
        y[i] = x[i] + h;
        let fp = f(&y)?;
        y[i] = x[i] - h;
        let fm = f(&y)?;
        y[i] = x[i];
        Ok((fp - fm) / (2.0 * h))
    };
    (0..x.len())
        .map(|i| {
            let d = diff(i, h)?;
            if richardson {
                let d2 = diff(i, 0.5 * h)?;
                Ok((4.0 * d2 - d) / 3.0)
            } else {
                Ok(d)
            }
        })
        .collect()
}

/// Weight c(λ_k, λ_l) of the spectral representation.
pub fn spectral_weight(kind: InfoKind, a: f64, b: f64) -> f64 {
    match kind {
        InfoKind::Fb => 2.0 / (a + b),
        InfoKind::Wy => 4.0 / (a.sqrt() + b.sqrt()).powi(2),
        InfoKind::Km => {
            if (a - b).abs() < KM_GAP * a.max(b) {
                2.0 / (a + b)
            } else {
                (a.ln() - b.ln()) / (a - b)
            }
        }
    }
}

/// ∂ω/∂γ for every coordinate, expressed in the eigenbasis of ω.
pub fn derivatives_in_eigenbasis(state: &EqbmState) -> Result<Vec<CMat>> {
    let v = state.omega_vectors();
    let vh = v.adjoint();
    (0..state.j() + state.k())
        .map(|p| Ok(&vh * d_omega(state, Param::from_flat(p, state.j()))? * &v))
        .collect()
}

/// Σ_{k,l} c(λ_k, λ_l) ⟨k|∂_a ω|l⟩⟨l|∂_b ω|k⟩.
pub fn spectral_info(state: &EqbmState, kind: InfoKind) -> Result<InfoMatrix> {
    let lam = state.probs();
    let d = state.dim();
    let c = RMat::from_fn(d, d, |k, l| spectral_weight(kind, lam[k], lam[l]));
    let ds = derivatives_in_eigenbasis(state)?;
    let n = ds.len();
    let mut m = RMat::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..d {
                for l in 0..d {
                    s += c[(k, l)] * ds[a][(k, l)] * ds[b][(l, k)];
                }
            }
            let v = linalg::real_part(s, 1e-9)?;
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    InfoMatrix::new(kind, state.j(), state.k(), m)
}

/// Second-order central differences of ε ↦ D(σ(γ)‖σ(γ+ε)) at ε = 0.
///
/// Diagonal entries use the three-point stencil, off-diagonal entries the
/// four-point mixed stencil, which is symmetric in (i, j).
pub fn divergence_hessian(
    family: impl Fn(&[f64]) -> Result<CMat> + Sync,
    gamma: &[f64],
    kind: DivergenceKind,
    h: f64,
) -> Result<RMat> {
    if !(h > 0.0 && h.is_finite()) {
        return contract(format!("step must be positive, got {h}"));
    }
    let base = family(gamma)?;
    let n = gamma.len();
    let d = |shift: &[(usize, f64)]| -> Result<f64> {
        let mut g = gamma.to_vec();
        for &(i, s) in shift {
            g[i] += s;
        }
        divergence(kind, &base, &family(&g)?)
    };
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            if i == j {
                // D(σ‖σ) = 0 at the centre.
                Ok((d(&[(i, h)])? + d(&[(i, -h)])?) / (h * h))
            } else {
                let pp = d(&[(i, h), (j, h)])?;
                let pm = d(&[(i, h), (j, -h)])?;
                let mp = d(&[(i, -h), (j, h)])?;
                let mm = d(&[(i, -h), (j, -h)])?;
                Ok((pp - pm - mp + mm) / (4.0 * h * h))
            }
        })
        .collect::<Result<_>>()?;
    let mut m = RMat::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(vals) {
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    Ok(m)
}

fn omega_family(model: &std::sync::Arc<DenseModel>, j: usize) -> impl Fn(&[f64]) -> Result<CMat> + Sync + '_ {
    move |g: &[f64]| Ok(resolve(model, &g[..j], &g[j..])?.omega().clone())
}

fn gamma_of(state: &EqbmState) -> Vec<f64> {
    state.theta().iter().chain(state.phi()).copied().collect()
}

/// Finite-difference information matrix of the evolved family at `state`.
pub fn hessian_info(state: &EqbmState, kind: InfoKind, h: f64) -> Result<InfoMatrix> {
    if !(1e-4..=1e-2).contains(&h) {
        return contract(format!("Hessian step {h} outside [1e-4, 1e-2]"));
    }
    let m = divergence_hessian(
        omega_family(state.model(), state.j()),
        &gamma_of(state),
        DivergenceKind::for_info(kind),
        h,
    )?;
    InfoMatrix::unchecked(kind, state.j(), state.k(), m)
}

/// Hessian of ln Z(θ) by second-order central differences.
pub fn ln_z_hessian(state: &EqbmState, h: f64) -> Result<RMat> {
    let model = state.model();
    let theta = state.theta();
    let ln_z = |t: &[f64]| -> Result<f64> { Ok(linalg::thermal(&model.g_matrix(t)?)?.ln_z) };
    let n = theta.len();
    let f0 = ln_z(theta)?;
    let mut m = RMat::zeros(n, n);
    let at = |shift: &[(usize, f64)]| -> Result<f64> {
        let mut t = theta.to_vec();
        for &(i, s) in shift {
            t[i] += s;
        }
        ln_z(&t)
    };
    for i in 0..n {
        m[(i, i)] = (at(&[(i, h)])? - 2.0 * f0 + at(&[(i, -h)])?) / (h * h);
        for j in 0..i {
            let v = (at(&[(i, h), (j, h)])? - at(&[(i, h), (j, -h)])? - at(&[(i, -h), (j, h)])?
                + at(&[(i, -h), (j, -h)])?)
                / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// |D(σ(γ)‖σ(γ+δu)) − ½δ² uᵀ I u| for the analytical matrix `info`.
pub fn taylor_remainder(state: &EqbmState, info: &InfoMatrix, u: &[f64], delta: f64) -> Result<f64> {
    let gamma = gamma_of(state);
    if u.len() != gamma.len() {
        return contract("direction has the wrong length");
    }
    let shifted: Vec<f64> = gamma.iter().zip(u).map(|(g, x)| g + delta * x).collect();
    let j = state.j();
    let tau = resolve(state.model(), &shifted[..j], &shifted[j..])?;
    let d = divergence(DivergenceKind::for_info(info.kind), state.omega(), tau.omega())?;
    let uv = nalgebra::DVector::from_column_slice(u);
    let quad = (uv.transpose() * info.matrix() * &uv)[(0, 0)];
    Ok((d - 0.5 * delta * delta * quad).abs())
}

/// Max-abs error of the FD Hessian against `reference` for each step.
pub fn h_sweep(state: &EqbmState, reference: &InfoMatrix, steps: &[f64]) -> Result<Vec<(f64, f64)>> {
    steps
        .iter()
        .map(|&h| {
            let m = divergence_hessian(
                omega_family(state.model(), state.j()),
                &gamma_of(state),
                DivergenceKind::for_info(reference.kind),
                h,
            )?;
            Ok((h, (m - reference.matrix()).amax()))
        })
        .collect()
}

pub fn h_sweep_csv(kind: InfoKind, rows: &[(f64, f64)]) -> String {
    let mut s = String::from("kind,h,max_abs_error\n");
    for (h, e) in rows {
        s.push_str(&format!("{kind},{h:e},{e:e}\n"));
    }
    s
}

/// 4 Re[⟨∂_iψ|∂_jψ⟩ − ⟨∂_iψ|ψ⟩⟨ψ|∂_jψ⟩].
pub fn pure_fb_from_derivs(psi: &CVec, derivs: &[CVec]) -> Result<RMat> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return contract(format!("state vector has norm {norm}, expected 1"));
    }
    if derivs.iter().any(|d| d.len() != psi.len()) {
        return contract("derivative length differs from the state");
    }
    let overlaps: Vec<Complex64> = derivs.iter().map(|d| d.dotc(psi)).collect();
    let n = derivs.len();
    Ok(RMat::from_fn(n, n, |i, j| {
        let z = derivs[i].dotc(&derivs[j]) - overlaps[i] * overlaps[j].conj();
        4.0 * z.re
    }))
}

/// Pure-state FB matrix with derivatives from central differences (step h).
pub fn pure_fb(family: impl Fn(&[f64]) -> Result<CVec>, gamma: &[f64], h: f64) -> Result<RMat> {
    let psi = family(gamma)?;
    let derivs = vector_derivatives(&family, gamma, h)?;
    pure_fb_from_derivs(&psi, &derivs)
}

pub fn vector_derivatives(family: &impl Fn(&[f64]) -> Result<CVec>, gamma: &[f64], h: f64) -> Result<Vec<CVec>> {
    let mut g = gamma.to_vec();
    (0..gamma.len())
        .map(|i| {
            g[i] = gamma[i] + h;
            let p = family(&g)?;
            g[i] = gamma[i] - h;
            let m = family(&g)?;
            g[i] = gamma[i];
            Ok((p - m) / Complex64::new(2.0 * h, 0.0))
        })
        .collect()
}

/// Analytical derivatives of the purification (√ω ⊗ I)|Γ⟩.
///
/// θ_j: ½⟨G_j⟩ψ − ¼ vec(U {Φ_{θ/2}(G_j), √ρ} U†);  φ_k: i vec([√ω, Ψ_φ(H_k)]).
pub fn purified_derivatives(state: &EqbmState) -> Result<Vec<CVec>> {
    let psi = state.canonical_purification(true);
    let sr = state.sqrt_rho();
    let so = state.sqrt_omega();
    let mut out = Vec::with_capacity(state.j() + state.k());
    for j in 0..state.j() {
        let half = state.phi_channel(state.g_term(j), true)?;
        let a = linalg::conjugate(state.u(), &linalg::acomm(&half, sr));
        out.push(&psi * Complex64::new(0.5 * state.g_means()[j], 0.0) - vectorize(&a) * Complex64::new(0.25, 0.0));
    }
    for k in 0..state.k() {
        let b = state.psi_channel(state.h_term(k), false)?;
        out.push(vectorize(&linalg::comm(&so, &b)) * Complex64::new(0.0, 1.0));
    }
    Ok(out)
}

/// FB matrix of the purified family, from the analytical derivatives.
pub fn purified_fb(state: &EqbmState) -> Result<RMat> {
    pure_fb_from_derivs(&state.canonical_purification(true), &purified_derivatives(state)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::info_matrix;
    use crate::pauli::random_model;
    use crate::testutil::{random_density, random_state};
    use proptest::prelude::*;

    fn diag(p: f64) -> CMat {
        CMat::from_diagonal(&nalgebra::dvector![Complex64::new(p, 0.0), Complex64::new(1.0 - p, 0.0)])
    }

    #[test]
    fn divergences_vanish_on_equal_arguments() {
        for seed in 0..10 {
            let r = random_density(4, seed);
            for kind in [DivergenceKind::RelEnt, DivergenceKind::Uhlmann, DivergenceKind::Holevo] {
                assert!(divergence(kind, &r, &r).unwrap().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn relent_is_classical_kl_on_diagonal_pairs() {
        for (p, q) in [(0.3f64, 0.6f64), (0.01, 0.5), (0.9, 0.2)] {
            let kl = p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
            let got = divergence(DivergenceKind::RelEnt, &diag(p), &diag(q)).unwrap();
            assert!((got - kl).abs() < 1e-12);
        }
    }

    #[test]
    fn ordering_chain_and_fidelity_bounds() {
        for seed in 0..50 {
            let w = random_density(3, 2 * seed);
            let t = random_density(3, 2 * seed + 1);
            let dh = divergence(DivergenceKind::Holevo, &w, &t).unwrap();
            let du = divergence(DivergenceKind::Uhlmann, &w, &t).unwrap();
            let fh = holevo_fidelity(&w, &t).unwrap();
            let f = fidelity(&w, &t).unwrap();
            assert!(dh >= du - 1e-12);
            assert!(du >= -fh.ln() - 1e-12);
            assert!(fh > 0.0 && fh <= f + 1e-12 && f <= fh.sqrt() + 1e-12);
            assert!(divergence(DivergenceKind::RelEnt, &w, &t).unwrap() >= -1e-10);
        }
    }

    #[test]
    fn rejects_singular_inputs() {
        let pure = diag(1.0);
        let mixed = diag(0.5);
        for kind in [DivergenceKind::RelEnt, DivergenceKind::Uhlmann, DivergenceKind::Holevo] {
            assert!(matches!(divergence(kind, &pure, &mixed), Err(Error::Domain(_))));
            assert!(matches!(divergence(kind, &mixed, &pure), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn central_difference_on_polynomial() {
        let f = |x: &[f64]| Ok(x[0].powi(3) + 2.0 * x[0] * x[1]);
        let g = central_difference(f, &[1.5, -0.5], 1e-4, false).unwrap();
        assert!((g[0] - (3.0 * 2.25 - 1.0)).abs() < 1e-7);
        assert!((g[1] - 3.0).abs() < 1e-9);
        let r = central_difference(|x: &[f64]| Ok(x[0].sin()), &[0.7], 1e-2, true).unwrap();
        assert!((r[0] - 0.7f64.cos()).abs() < 1e-9);
        assert!(central_difference(f, &[0.0], 0.0, false).is_err());
    }

    #[test]
    fn spectral_matches_analytical() {
        for seed in 0..20 {
            let n = 1 + (seed % 3) as usize;
            let (j, k) = if n == 1 { (1 + seed as usize % 2, 1) } else { (1 + seed as usize % 3, 1 + (seed as usize / 3) % 3) };
            let s = random_state(n, j, k, seed);
            for kind in InfoKind::ALL {
                let a = info_matrix(&s, kind).unwrap();
                let b = spectral_info(&s, kind).unwrap();
                assert!(a.max_abs_diff(&b) < 1e-8, "seed {seed} {kind}: {}", a.max_abs_diff(&b));
            }
        }
    }

    #[test]
    fn spectral_classical_and_symmetric_point() {
        let m = random_model(2, 3, 2, 1.0, 4).unwrap();
        let dm = DenseModel::new(m.clone());
        let s = resolve(&dm, &[0.0; 3], &m.phi).unwrap();
        let fb = spectral_info(&s, InfoKind::Fb).unwrap().theta_block();
        for kind in [InfoKind::Wy, InfoKind::Km] {
            assert!((spectral_info(&s, kind).unwrap().theta_block() - &fb).amax() < 1e-9);
        }
    }

    #[test]
    fn helper_identities_in_eigenbasis() {
        // ⟨k|∂_θ ω|l⟩ = −½(λ_k+λ_l)⟨k̃|Φ(G_j)|l̃⟩ + δ_kl λ_k ⟨G_j⟩ and
        // ⟨k|∂_φ ω|l⟩ = i(λ_k−λ_l)⟨k|Ψ(H_i)|l⟩.
        let s = random_state(2, 2, 2, 17);
        let ds = derivatives_in_eigenbasis(&s).unwrap();
        let v = s.omega_vectors();
        let vt = s.eig_g().vectors.clone();
        let lam = s.probs();
        for j in 0..2 {
            let f = vt.adjoint() * s.phi_channel(s.g_term(j), false).unwrap() * &vt;
            let p = v.adjoint() * s.psi_channel(s.h_term(j), false).unwrap() * &v;
            for k in 0..4 {
                for l in 0..4 {
                    let mut want = f[(k, l)] * (-0.5 * (lam[k] + lam[l]));
                    if k == l {
                        want += lam[k] * s.g_means()[j];
                    }
                    assert!((ds[j][(k, l)] - want).norm() < 1e-12);
                    let want_phi = p[(k, l)] * Complex64::new(0.0, lam[k] - lam[l]);
                    assert!((ds[2 + j][(k, l)] - want_phi).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn km_weight_limit() {
        let a = 0.3;
        assert!((spectral_weight(InfoKind::Km, a, a) - 1.0 / a).abs() < 1e-15);
        assert!((spectral_weight(InfoKind::Km, a, a * (1.0 + 1e-12)) - 1.0 / a).abs() < 1e-9);
        let near = spectral_weight(InfoKind::Km, a, a * (1.0 + 1e-6));
        assert!((near - 1.0 / a).abs() < 1e-5);
    }

    #[test]
    fn hessians_match_analytical() {
        for seed in 0..6 {
            let s = random_state(1 + (seed % 2) as usize, 1 + (seed % 2) as usize, 1, 40 + seed);
            for kind in InfoKind::ALL {
                let a = info_matrix(&s, kind).unwrap();
                let h = hessian_info(&s, kind, DEFAULT_HESSIAN_STEP).unwrap();
                assert!(a.max_abs_diff(&h) < 5e-4, "seed {seed} {kind}: {}", a.max_abs_diff(&h));
            }
        }
        let s = random_state(1, 1, 1, 3);
        assert!(hessian_info(&s, InfoKind::Fb, 0.1).is_err());
    }

    #[test]
    fn ln_z_hessian_equals_km_theta_block() {
        for seed in 0..5 {
            let s = random_state(2, 3, 1, 60 + seed);
            let km = info_matrix(&s, InfoKind::Km).unwrap().theta_block();
            assert!((ln_z_hessian(&s, 1e-3).unwrap() - km).amax() < 1e-5);
        }
    }

    #[test]
    fn taylor_remainder_is_cubic() {
        let s = random_state(2, 2, 2, 8);
        let u = [0.5, -0.5, 0.5, 0.5];
        for kind in InfoKind::ALL {
            let info = info_matrix(&s, kind).unwrap();
            let c1 = taylor_remainder(&s, &info, &u, 1e-3).unwrap() / 1e-9;
            let c2 = taylor_remainder(&s, &info, &u, 5e-4).unwrap() / 1.25e-10;
            assert!(c1.is_finite() && c1 < 10.0, "{kind}: C = {c1}");
            assert!((c1 / c2 - 1.0).abs() < 0.1, "{kind}: {c1} vs {c2}");
        }
    }

    #[test]
    fn h_sweep_writes_csv() {
        let s = random_state(2, 2, 1, 12);
        let info = info_matrix(&s, InfoKind::Km).unwrap();
        let rows = h_sweep(&s, &info, &[1e-2, 3e-3, 1e-3, 3e-4, 1e-4]).unwrap();
        let at = |h: f64| rows.iter().find(|r| r.0 == h).unwrap().1;
        // Truncation error shrinks quadratically until round-off takes over.
        assert!(at(1e-3) < at(1e-2));
        assert!(at(1e-3) < 5e-4);
        let csv = h_sweep_csv(InfoKind::Km, &rows);
        assert_eq!(csv.lines().count(), 6);
        let dir = std::env::temp_dir();
        std::fs::write(dir.join("eqbm_h_sweep_km.csv"), csv).unwrap();
    }

    #[test]
    fn pure_fb_hand_examples() {
        let rot = |g: &[f64]| Ok(nalgebra::dvector![Complex64::new(g[0].cos(), 0.0), Complex64::new(g[0].sin(), 0.0)]);
        let m = pure_fb(rot, &[0.4], VECTOR_STEP).unwrap();
        assert!((m[(0, 0)] - 4.0).abs() < 1e-7);
        let phase = |g: &[f64]| Ok(nalgebra::dvector![Complex64::from_polar(1.0, g[0]), Complex64::new(0.0, 0.0)]);
        assert!(pure_fb(phase, &[0.9], VECTOR_STEP).unwrap()[(0, 0)].abs() < 1e-7);
        let bad = |_: &[f64]| Ok(nalgebra::dvector![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
        assert!(matches!(pure_fb(bad, &[0.0], VECTOR_STEP), Err(Error::Contract(_))));
    }

    #[test]
    fn purified_family_gives_wy() {
        for seed in 0..10 {
            let s = random_state(1 + (seed % 2) as usize, 1 + (seed % 2) as usize, 1, 80 + seed);
            let wy = info_matrix(&s, InfoKind::Wy).unwrap();
            let analytic = purified_fb(&s).unwrap();
            assert!((&analytic - wy.matrix()).amax() < 1e-7);
            let dm = s.model().clone();
            let j = s.j();
            let fam = move |g: &[f64]| Ok(resolve(&dm, &g[..j], &g[j..])?.canonical_purification(true));
            let gamma = gamma_of(&s);
            let fd = vector_derivatives(&fam, &gamma, VECTOR_STEP).unwrap();
            for (a, b) in purified_derivatives(&s).unwrap().iter().zip(&fd) {
                assert!((a - b).iter().all(|z| z.norm() < 1e-7));
            }
            let numeric = pure_fb(&fam, &gamma, VECTOR_STEP).unwrap();
            assert!((numeric - wy.matrix()).amax() < 1e-7);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn divergences_nonnegative(s1 in 0u64..10_000, s2 in 0u64..10_000, d in 2usize..5) {
            let w = random_density(d, s1);
            let t = random_density(d, s2.wrapping_add(77_777));
            for kind in [DivergenceKind::RelEnt, DivergenceKind::Uhlmann, DivergenceKind::Holevo] {
                prop_assert!(divergence(kind, &w, &t).unwrap() >= -1e-10);
            }
        }
    }
}
