//! Hermitian eigendecomposition and the matrix functions built on it.
//!
//! Every matrix function (exponentials, square roots, logarithms, Gibbs
//! states) goes through [`eigh`], so all downstream quantities share one
//! spectral representation.

use nalgebra::linalg::SymmetricEigen;

use crate::{contract, CMat, Complex64, Error, RMat, Result};

/// Reconstruction and orthonormality tolerance, relative to the input norm.
pub const RECON_TOL: f64 = 1e-10;
/// Allowed relative asymmetry of an input declared Hermitian.
pub const HERM_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EigSystem {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Column eigenvectors, matching `values`.
    pub vectors: CMat,
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// max |A − A†| / max |A| (0 for the zero matrix).
pub fn hermitian_asymmetry(a: &CMat) -> f64 {
    let scale = max_abs(a);
    if scale == 0.0 {
        return 0.0;
    }
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

pub fn check_hermitian(a: &CMat) -> Result<()> {
    if a.nrows() != a.ncols() {
        return contract(format!("matrix is {}x{}, not square", a.nrows(), a.ncols()));
    }
    let asym = hermitian_asymmetry(a);
    if asym > HERM_TOL {
        return Err(Error::NotHermitian(asym));
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix, values ascending.
pub fn eigh(a: &CMat) -> Result<EigSystem> {
    check_hermitian(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(EigSystem { values: vec![], vectors: CMat::zeros(0, 0) });
    }
    let mut h = a.clone();
    for i in 0..n {
        h[(i, i)] = Complex64::new(h[(i, i)].re, 0.0);
    }
    let se = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| se.eigenvalues[x].total_cmp(&se.eigenvalues[y]));
    let values: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("eigendecomposition produced non-finite eigenvalues".into()));
    }
    let e = EigSystem { values, vectors };
    let scale = max_abs(a).max(1.0);
    let resid = max_abs(&(e.reconstruct() - a));
    if resid > RECON_TOL * scale {
        return Err(Error::Domain(format!("eigendecomposition residual {resid:.3e} too large")));
    }
    Ok(e)
}

impl EigSystem {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn reconstruct(&self) -> CMat {
        self.func_unchecked(|w| Complex64::new(w, 0.0))
    }

    /// V† X V.
    pub fn to_eigenbasis(&self, x: &CMat) -> CMat {
        self.vectors.adjoint() * x * &self.vectors
    }

    /// V Y V†.
    pub fn from_eigenbasis(&self, y: &CMat) -> CMat {
        &self.vectors * y * self.vectors.adjoint()
    }

    fn func_unchecked(&self, f: impl Fn(f64) -> Complex64) -> CMat {
        let mut scaled = self.vectors.clone();
        for (k, &w) in self.values.iter().enumerate() {
            let fk = f(w);
            scaled.column_mut(k).iter_mut().for_each(|z| *z *= fk);
        }
        scaled * self.vectors.adjoint()
    }

    /// V diag(f(w)) V†, failing if f is non-finite on any eigenvalue.
    pub fn func(&self, f: impl Fn(f64) -> Complex64) -> Result<CMat> {
        let fw: Vec<Complex64> = self.values.iter().map(|&w| f(w)).collect();
        if let Some(k) = fw.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Domain(format!(
                "matrix function is not finite at eigenvalue {:e}",
                self.values[k]
            )));
        }
        let mut scaled = self.vectors.clone();
        for (k, z) in fw.iter().enumerate() {
            scaled.column_mut(k).iter_mut().for_each(|x| *x *= z);
        }
        let mut m = scaled * self.vectors.adjoint();
        if fw.iter().all(|z| z.im == 0.0) {
            // Real function of a Hermitian matrix: pin the diagonal to be real.
            for i in 0..m.nrows() {
                m[(i, i)].im = 0.0;
            }
        }
        Ok(m)
    }

    pub fn func_real(&self, f: impl Fn(f64) -> f64) -> Result<CMat> {
        self.func(|w| Complex64::new(f(w), 0.0))
    }

    /// e^{-iAt} for the decomposed matrix A.
    pub fn evolution(&self, t: f64) -> CMat {
        self.func_unchecked(|w| Complex64::from_polar(1.0, -w * t))
    }
}

pub fn func_of_hermitian(e: &EigSystem, f: impl Fn(f64) -> Complex64) -> Result<CMat> {
    e.func(f)
}

/// Gibbs state of a Hermitian generator.
#[derive(Debug, Clone)]
pub struct Thermal {
    pub rho: CMat,
    pub z: f64,
    pub ln_z: f64,
    /// Eigensystem of the generator G.
    pub eig: EigSystem,
    /// Eigenvalues of ρ, paired with `eig.vectors` (so descending).
    pub probs: Vec<f64>,
}

/// ρ = e^{−G}/Z with lnZ = −w_min + ln Σ e^{−(w − w_min)}.
pub fn thermal(g: &CMat) -> Result<Thermal> {
    let eig = eigh(g)?;
    Ok(thermal_from_eig(eig))
}

pub fn thermal_from_eig(eig: EigSystem) -> Thermal {
    let w_min = eig.values.first().copied().unwrap_or(0.0);
    let weights: Vec<f64> = eig.values.iter().map(|w| (-(w - w_min)).exp()).collect();
    let s: f64 = weights.iter().sum();
    let ln_z = -w_min + s.ln();
    let probs: Vec<f64> = weights.iter().map(|x| x / s).collect();
    let rho = eig.func_unchecked(|w| Complex64::new((-(w - w_min)).exp() / s, 0.0));
    let mut rho = rho;
    for i in 0..rho.nrows() {
        rho[(i, i)].im = 0.0;
    }
    Thermal { rho, z: ln_z.exp(), ln_z, eig, probs }
}

/// Principal square root of a positive semidefinite matrix; tiny negative
/// eigenvalues from round-off are clamped to zero.
pub fn sqrt_psd(a: &CMat) -> Result<CMat> {
    let e = eigh(a)?;
    let floor = -1e-12 * e.values.iter().fold(1.0f64, |m, w| m.max(w.abs()));
    if let Some(&w) = e.values.iter().find(|&&w| w < floor) {
        return Err(Error::Domain(format!("square root of negative eigenvalue {w:e}")));
    }
    e.func_real(|w| w.max(0.0).sqrt())
}

/// Matrix logarithm of a positive definite matrix.
pub fn log_pd(a: &CMat) -> Result<CMat> {
    let e = eigh(a)?;
    if let Some(&w) = e.values.iter().find(|&&w| w <= 0.0) {
        return Err(Error::Domain(format!("logarithm of nonpositive eigenvalue {w:e}")));
    }
    e.func_real(f64::ln)
}

pub fn comm(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn acomm(a: &CMat, b: &CMat) -> CMat {
    a * b + b * a
}

/// Tr[A B] without forming the product.
pub fn tr_prod(a: &CMat, b: &CMat) -> Complex64 {
    let n = a.nrows();
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

/// ⟨A⟩_ρ = Tr[A ρ].
pub fn expect(a: &CMat, rho: &CMat) -> Complex64 {
    tr_prod(a, rho)
}

/// Discards an imaginary part after checking it is below `tol·max(1, |re|)`.
pub fn real_part(z: Complex64, tol: f64) -> Result<f64> {
    if z.im.abs() > tol * z.re.abs().max(1.0) {
        return Err(Error::ImaginaryResidue(z.im));
    }
    Ok(z.re)
}

/// U X U†.
pub fn conjugate(u: &CMat, x: &CMat) -> CMat {
    u * x * u.adjoint()
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    max_abs(&(a - b))
}

/// Ascending eigenvalues of a real symmetric matrix.
pub fn sym_eigvals(m: &RMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return vec![];
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut v: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn is_unitary(u: &CMat, tol: f64) -> bool {
    let n = u.nrows();
    u.ncols() == n && max_abs(&(u.adjoint() * u - CMat::identity(n, n))) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    use crate::testutil::{random_density, random_hermitian};

    #[test]
    fn eigh_diagonal() {
        let a = CMat::from_diagonal(&nalgebra::dvector![c(0.7), c(-0.7)]);
        let e = eigh(&a).unwrap();
        assert_eq!(e.values, vec![-0.7, 0.7]);
    }

    #[test]
    fn eigh_pauli_x() {
        let x = crate::pauli::Pauli::X.matrix();
        let e = eigh(&x).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // Eigenvectors are (|0⟩ ∓ |1⟩)/√2 up to a phase.
        let v0 = e.vectors.column(0);
        let v1 = e.vectors.column(1);
        let minus = (v0[0] * c(s) - v0[1] * c(s)).norm();
        let plus = (v1[0] * c(s) + v1[1] * c(s)).norm();
        assert!((minus - 1.0).abs() < 1e-12 && (plus - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigh_random_reconstruction() {
        let a = random_hermitian(8, 3);
        let e = eigh(&a).unwrap();
        assert!(max_abs_diff(&e.reconstruct(), &a) < 1e-10);
        assert!(is_unitary(&e.vectors, 1e-10));
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let mut a = random_hermitian(3, 1);
        a[(0, 1)] += c(1e-3);
        assert!(matches!(eigh(&a), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = eigh(&CMat::zeros(2, 2)).unwrap();
        assert_eq!(e.func_real(f64::exp).unwrap(), CMat::identity(2, 2));
    }

    #[test]
    fn phase_evolution_of_z() {
        let e = eigh(&crate::pauli::Pauli::Z.matrix()).unwrap();
        let u = e.evolution(std::f64::consts::PI);
        assert!(max_abs_diff(&u, &(CMat::identity(2, 2) * c(-1.0))) < 1e-15);
    }

    #[test]
    fn sqrt_squares_back() {
        let rho = random_density(4, 9);
        let s = sqrt_psd(&rho).unwrap();
        assert!(max_abs_diff(&(&s * &s), &rho) < 1e-10);
    }

    #[test]
    fn log_of_nonpositive_is_domain_error() {
        let a = CMat::from_diagonal(&nalgebra::dvector![c(1.0), c(-0.5)]);
        match log_pd(&a) {
            Err(Error::Domain(msg)) => assert!(msg.contains("-5e-1"), "{msg}"),
            other => panic!("expected domain error, got {other:?}"),
        }
        let e = eigh(&a).unwrap();
        assert!(matches!(e.func_real(f64::ln), Err(Error::Domain(_))));
    }

    #[test]
    fn thermal_of_zero_is_maximally_mixed() {
        let t = thermal(&CMat::zeros(2, 2)).unwrap();
        assert!(max_abs_diff(&t.rho, &(CMat::identity(2, 2) * c(0.5))) < 1e-15);
        assert!((t.z - 2.0).abs() < 1e-14);
    }

    #[test]
    fn thermal_two_level() {
        let g = crate::pauli::Pauli::Z.matrix();
        let t = thermal(&g).unwrap();
        let s = (-1.0f64).exp() + 1.0f64.exp();
        assert!((t.rho[(0, 0)].re - (-1.0f64).exp() / s).abs() < 1e-15);
        assert!((t.rho[(1, 1)].re - 1.0f64.exp() / s).abs() < 1e-15);
        assert!((t.ln_z - s.ln()).abs() < 1e-14);
    }

    #[test]
    fn thermal_random_properties() {
        let g = random_hermitian(4, 21);
        let t = thermal(&g).unwrap();
        assert!((t.rho.trace().re - 1.0).abs() < 1e-12);
        assert!(eigh(&t.rho).unwrap().values[0] > 0.0);
        assert!(comm(&t.rho, &g).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn ln_z_stable_for_large_generators() {
        let g = random_hermitian(4, 5) * c(300.0);
        let t = thermal(&g).unwrap();
        assert!(t.ln_z.is_finite());
        assert!((t.rho.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_spectrum_any_basis_is_fine() {
        // Z⊗I has two doubly degenerate eigenvalues.
        let g: CMat = "ZI".parse::<crate::pauli::PauliString>().unwrap().dense();
        let t = thermal(&(g.clone() * c(0.8))).unwrap();
        let direct = CMat::from_diagonal(&nalgebra::dvector![
            c((-0.8f64).exp()),
            c((-0.8f64).exp()),
            c(0.8f64.exp()),
            c(0.8f64.exp())
        ]);
        let direct = &direct / direct.trace();
        assert!(max_abs_diff(&t.rho, &direct) < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn evolution_is_unitary(seed in 0u64..10_000, n in 1usize..6, t in -20.0f64..20.0) {
                let e = eigh(&random_hermitian(n, seed)).unwrap();
                prop_assert!(is_unitary(&e.evolution(t), 1e-10));
            }

            #[test]
            fn thermal_commutes_with_generator(seed in 0u64..10_000, n in 1usize..6) {
                let g = random_hermitian(n, seed) * c(3.0);
                let t = thermal(&g).unwrap();
                prop_assert!(comm(&t.rho, &g).iter().all(|z| z.norm() < 1e-11));
            }

            #[test]
            fn log_sum_exp_matches_naive(seed in 0u64..10_000, n in 1usize..6, s in 0.1f64..20.0) {
                let g0 = random_hermitian(n, seed);
                let norm = eigh(&g0).unwrap().values.iter().fold(0.0f64, |m, w| m.max(w.abs()));
                let g = g0 * c(s / norm.max(1e-12));
                let t = thermal(&g).unwrap();
                let naive = eigh(&g).unwrap().func_real(|w| (-w).exp()).unwrap().trace().re.ln();
                prop_assert!((t.ln_z - naive).abs() < 1e-10);
            }
        }
    }
}
