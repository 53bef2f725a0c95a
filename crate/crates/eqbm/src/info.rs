//! Fisher–Bures, Wigner–Yanase and Kubo–Mori information matrices.
//!
//! Every matrix uses the layout
//!
//! ```text
//! [ I(θ)      I(θ,φ) ]
//! [ I(θ,φ)ᵀ   I(φ)   ]
//! ```
//!
//! with rows and columns ordered (θ₁..θ_J, φ₁..φ_K). Entries come from
//! closed-form expectations in ρ(θ) involving the channels Φ_θ, Φ_{θ/2} and Ψ_φ†.

use std::fmt;
use std::str::FromStr;

use crate::linalg::{acomm, comm, expect, real_part, sym_eigvals, tr_prod};
use crate::state::EqbmState;
use crate::{contract, CMat, Complex64, Error, RMat, Result};

/// Tolerance on imaginary residues of assembled entries.
pub const ENTRY_IMAG_TOL: f64 = 1e-9;
/// Allowed asymmetry of a constructed matrix.
pub const SYM_TOL: f64 = 1e-9;
/// Eigenvalue slack for positive semidefiniteness.
pub const PSD_SLACK: f64 = -1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InfoKind {
    Fb,
    Wy,
    Km,
}

impl InfoKind {
    pub const ALL: [InfoKind; 3] = [InfoKind::Fb, InfoKind::Wy, InfoKind::Km];
}

impl fmt::Display for InfoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InfoKind::Fb => "FB",
            InfoKind::Wy => "WY",
            InfoKind::Km => "KM",
        })
    }
}

impl FromStr for InfoKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fb" => Ok(InfoKind::Fb),
            "wy" => Ok(InfoKind::Wy),
            "km" => Ok(InfoKind::Km),
            _ => contract(format!("unknown information matrix kind {s:?}")),
        }
    }
}

/// Block of the information matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    ThetaTheta,
    PhiPhi,
    ThetaPhi,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Block::ThetaTheta => "tt",
            Block::PhiPhi => "pp",
            Block::ThetaPhi => "tp",
        })
    }
}

impl FromStr for Block {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tt" | "theta-theta" | "θθ" => Ok(Block::ThetaTheta),
            "pp" | "phi-phi" | "φφ" => Ok(Block::PhiPhi),
            "tp" | "theta-phi" | "θφ" => Ok(Block::ThetaPhi),
            _ => contract(format!("unknown block {s:?} (expected tt, pp or tp)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix {
    pub kind: InfoKind,
    pub j: usize,
    pub k: usize,
    m: RMat,
}

impl InfoMatrix {
    /// Checks symmetry and positive semidefiniteness, then copies the θφ block
    /// onto the φθ block so the two are exact transposes.
    pub fn new(kind: InfoKind, j: usize, k: usize, m: RMat) -> Result<Self> {
        let out = Self::unchecked(kind, j, k, m)?;
        let scale = out.m.amax().max(1.0);
        let asym = (&out.m - out.m.transpose()).amax();
        if asym > SYM_TOL * scale {
            return contract(format!("{kind} matrix is not symmetric (asymmetry {asym:.3e})"));
        }
        let min = out.min_eigenvalue();
        if min < PSD_SLACK * scale {
            return Err(Error::NotPsd(min));
        }
        Ok(out.mirrored())
    }

    /// No validation; used for finite-difference estimates.
    pub fn unchecked(kind: InfoKind, j: usize, k: usize, m: RMat) -> Result<Self> {
        if m.nrows() != j + k || m.ncols() != j + k {
            return contract(format!("matrix is {}x{}, expected {}", m.nrows(), m.ncols(), j + k));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("{kind} matrix has non-finite entries")));
        }
        Ok(InfoMatrix { kind, j, k, m })
    }

    fn mirrored(mut self) -> Self {
        let j = self.j;
        for a in 0..j {
            for b in 0..self.k {
                self.m[(j + b, a)] = self.m[(a, j + b)];
            }
        }
        for a in 0..j + self.k {
            for b in 0..a {
                if a >= j && b < j {
                    continue;
                }
                let v = 0.5 * (self.m[(a, b)] + self.m[(b, a)]);
                self.m[(a, b)] = v;
                self.m[(b, a)] = v;
            }
        }
        self
    }

    pub fn matrix(&self) -> &RMat {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.j + self.k
    }

    pub fn theta_block(&self) -> RMat {
        self.m.view((0, 0), (self.j, self.j)).into_owned()
    }

    pub fn phi_block(&self) -> RMat {
        self.m.view((self.j, self.j), (self.k, self.k)).into_owned()
    }

    /// J×K block I(θ,φ).
    pub fn cross_block(&self) -> RMat {
        self.m.view((0, self.j), (self.j, self.k)).into_owned()
    }

    pub fn block(&self, b: Block) -> RMat {
        match b {
            Block::ThetaTheta => self.theta_block(),
            Block::PhiPhi => self.phi_block(),
            Block::ThetaPhi => self.cross_block(),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        sym_eigvals(&self.m).first().copied().unwrap_or(0.0)
    }

    pub fn max_abs_diff(&self, other: &InfoMatrix) -> f64 {
        (&self.m - &other.m).amax()
    }

    /// Restriction to the given flat coordinates (for frozen parameters).
    pub fn restrict(&self, idx: &[usize]) -> RMat {
        RMat::from_fn(idx.len(), idx.len(), |a, b| self.m[(idx[a], idx[b])])
    }
}

/// Operators shared by all three metrics at one state.
struct Ingredients<'s> {
    state: &'s EqbmState,
    /// Φ_θ(G_i)
    phi_g: Vec<CMat>,
    /// Ψ_φ†(H_k)
    psi_h: Vec<CMat>,
}

impl<'s> Ingredients<'s> {
    fn new(state: &'s EqbmState) -> Result<Self> {
        let phi_g = (0..state.j())
            .map(|i| state.phi_channel(state.g_term(i), false))
            .collect::<Result<_>>()?;
        let psi_h = (0..state.k())
            .map(|i| state.psi_channel(state.h_term(i), true))
            .collect::<Result<_>>()?;
        Ok(Ingredients { state, phi_g, psi_h })
    }

    fn ev(&self, a: &CMat) -> Complex64 {
        expect(a, self.state.rho())
    }

    fn covariance_term(&self, i: usize, j: usize) -> f64 {
        let m = self.state.g_means();
        m[i] * m[j]
    }
}

fn re(z: Complex64) -> Result<f64> {
    real_part(z, ENTRY_IMAG_TOL)
}

const I: Complex64 = Complex64::new(0.0, 1.0);

fn assemble(
    kind: InfoKind,
    state: &EqbmState,
    mut tt: impl FnMut(usize, usize) -> Result<f64>,
    mut pp: impl FnMut(usize, usize) -> Result<f64>,
    mut tp: impl FnMut(usize, usize) -> Result<f64>,
) -> Result<InfoMatrix> {
    let (j, k) = (state.j(), state.k());
    let mut m = RMat::zeros(j + k, j + k);
    for a in 0..j {
        for b in a..j {
            let v = tt(a, b)?;
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    for a in 0..k {
        for b in 0..k {
            m[(j + a, j + b)] = pp(a, b)?;
        }
    }
    for a in 0..j {
        for b in 0..k {
            m[(a, j + b)] = tp(a, b)?;
        }
    }
    for a in 0..j {
        for b in 0..k {
            m[(j + b, a)] = m[(a, j + b)];
        }
    }
    InfoMatrix::new(kind, j, k, m)
}

/// Fisher–Bures information matrix.
///
/// θθ: ½⟨{Φ(G_i), Φ(G_j)}⟩ − ⟨G_i⟩⟨G_j⟩;
/// φφ: ⟨[[Ψ†(H_j), G], Φ(Ψ†(H_i))]⟩;
/// θφ: i⟨[Φ(G_i), Ψ†(H_j)]⟩.
pub fn fb_matrix(state: &EqbmState) -> Result<InfoMatrix> {
    let ing = Ingredients::new(state)?;
    let phi_psi: Vec<CMat> = ing
        .psi_h
        .iter()
        .map(|x| state.phi_channel(x, false))
        .collect::<Result<_>>()?;
    let comm_g: Vec<CMat> = ing.psi_h.iter().map(|x| comm(x, state.g())).collect();
    assemble(
        InfoKind::Fb,
        state,
        |i, j| Ok(0.5 * re(ing.ev(&acomm(&ing.phi_g[i], &ing.phi_g[j])))? - ing.covariance_term(i, j)),
        |i, j| re(ing.ev(&comm(&comm_g[j], &phi_psi[i]))),
        |i, j| re(I * ing.ev(&comm(&ing.phi_g[i], &ing.psi_h[j]))),
    )
}

/// Wigner–Yanase information matrix.
///
/// θθ: ½Tr[Φ½(G_i)√ρ Φ½(G_j)√ρ] + ¼⟨{Φ½(G_i), Φ½(G_j)}⟩ − ⟨G_i⟩⟨G_j⟩;
/// φφ: −8Tr[Ψ†(H_j)√ρ Ψ†(H_i)√ρ] + 4⟨{Ψ†(H_i), Ψ†(H_j)}⟩;
/// θφ: i⟨[Φ½(G_i), Ψ†(H_j)]⟩ for θ index i and φ index j.
pub fn wy_matrix(state: &EqbmState) -> Result<InfoMatrix> {
    let ing = Ingredients::new(state)?;
    let half: Vec<CMat> = (0..state.j())
        .map(|i| state.phi_channel(state.g_term(i), true))
        .collect::<Result<_>>()?;
    let sr = state.sqrt_rho();
    let half_sr: Vec<CMat> = half.iter().map(|x| x * sr).collect();
    let psi_sr: Vec<CMat> = ing.psi_h.iter().map(|x| x * sr).collect();
    assemble(
        InfoKind::Wy,
        state,
        |i, j| {
            let skew = re(tr_prod(&half_sr[i], &half_sr[j]))?;
            let sym = re(ing.ev(&acomm(&half[i], &half[j])))?;
            Ok(0.5 * skew + 0.25 * sym - ing.covariance_term(i, j))
        },
        |i, j| {
            let skew = re(tr_prod(&psi_sr[j], &psi_sr[i]))?;
            let sym = re(ing.ev(&acomm(&ing.psi_h[i], &ing.psi_h[j])))?;
            Ok(-8.0 * skew + 4.0 * sym)
        },
        |i, j| re(I * ing.ev(&comm(&half[i], &ing.psi_h[j]))),
    )
}

/// Kubo–Mori information matrix.
///
/// θθ: ½⟨{G_i, Φ(G_j)}⟩ − ⟨G_i⟩⟨G_j⟩;
/// φφ: ⟨[[Ψ†(H_j), G], Ψ†(H_i)]⟩;
/// θφ: (i/2)⟨{Φ(G_i), [G, Ψ†(H_j)]}⟩.
pub fn km_matrix(state: &EqbmState) -> Result<InfoMatrix> {
    let ing = Ingredients::new(state)?;
    let comm_g: Vec<CMat> = ing.psi_h.iter().map(|x| comm(x, state.g())).collect();
    assemble(
        InfoKind::Km,
        state,
        |i, j| Ok(0.5 * re(ing.ev(&acomm(state.g_term(i), &ing.phi_g[j])))? - ing.covariance_term(i, j)),
        |i, j| re(ing.ev(&comm(&comm_g[j], &ing.psi_h[i]))),
        // [G, Ψ†H_j] = −[Ψ†H_j, G]
        |i, j| re(I * -0.5 * ing.ev(&acomm(&ing.phi_g[i], &comm_g[j]))),
    )
}

pub fn info_matrix(state: &EqbmState, kind: InfoKind) -> Result<InfoMatrix> {
    match kind {
        InfoKind::Fb => fb_matrix(state),
        InfoKind::Wy => wy_matrix(state),
        InfoKind::Km => km_matrix(state),
    }
}

/// WY φφ block in the commutator form −4 Tr[[Ψ†(H_i), √ρ][Ψ†(H_j), √ρ]].
pub fn wy_phi_block_commutator_form(state: &EqbmState) -> Result<RMat> {
    let sr = state.sqrt_rho();
    let c: Vec<CMat> = (0..state.k())
        .map(|k| Ok(comm(&state.psi_channel(state.h_term(k), true)?, sr)))
        .collect::<Result<_>>()?;
    let mut m = RMat::zeros(state.k(), state.k());
    for a in 0..state.k() {
        for b in 0..state.k() {
            m[(a, b)] = re(tr_prod(&c[a], &c[b]) * Complex64::new(-4.0, 0.0))?;
        }
    }
    Ok(m)
}

/// Single entry from the analytical matrix, addressed by block and indices.
pub fn info_entry(state: &EqbmState, kind: InfoKind, block: Block, i: usize, j: usize) -> Result<f64> {
    let (jn, kn) = (state.j(), state.k());
    let (r, c) = match block {
        Block::ThetaTheta if i < jn && j < jn => (i, j),
        Block::PhiPhi if i < kn && j < kn => (jn + i, jn + j),
        Block::ThetaPhi if i < jn && j < kn => (i, jn + j),
        _ => return contract(format!("indices ({i}, {j}) out of range for block {block}")),
    };
    Ok(info_matrix(state, kind)?.matrix()[(r, c)])
}
