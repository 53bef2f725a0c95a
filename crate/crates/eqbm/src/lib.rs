//! Exact dense simulation of evolved quantum Boltzmann machines.
//!
//! An evolved QBM is the state
//!
//! ```text
//! ω(θ, φ) = e^{-iH(φ)} ρ(θ) e^{iH(φ)},   ρ(θ) = e^{-G(θ)} / Tr e^{-G(θ)}
//! ```
//!
//! with `G(θ) = Σ θ_j G_j` and `H(φ) = Σ φ_k H_k` real combinations of Pauli
//! strings. The crate provides:
//!
//! - [`pauli`]: Pauli strings, parameterized Hamiltonians, random models.
//! - [`linalg`]: Hermitian eigendecomposition and matrix functions.
//! - [`state`]: the resolved state, the averaging channels Φ and Ψ, the
//!   high-peak-tent time sampler and canonical purifications.
//! - [`gradients`]: state derivatives and objective gradients for ground-state
//!   energy estimation and generative modelling.
//! - [`info`]: Fisher–Bures, Wigner–Yanase and Kubo–Mori information matrices.
//! - [`oracle`]: independent reference computations (divergences, spectral
//!   metrics, finite-difference Hessians, pure-state Fisher information).
//! - [`estimators`]: shot-level simulation of the Hadamard-test circuits.
//! - [`quadrature`]: Gauss–Legendre rules and a rule for the tent density.
//! - [`trainer`]: gradient and natural-gradient descent.
//!
//! Qubit 0 is the leftmost (most significant) Kronecker factor everywhere.

#![forbid(unsafe_code)]

pub mod estimators;
pub mod gradients;
pub mod info;
pub mod linalg;
pub mod oracle;
pub mod pauli;
pub mod quadrature;
pub mod state;
pub mod trainer;

use thiserror::Error;

pub use num_complex::Complex64;

/// Dense complex matrix used for every operator.
pub type CMat = nalgebra::DMatrix<Complex64>;
/// Dense complex vector (state vectors, purifications).
pub type CVec = nalgebra::DVector<Complex64>;
/// Dense real matrix (information matrices).
pub type RMat = nalgebra::DMatrix<f64>;

#[derive(Debug, Error)]
pub enum Error {
    /// A documented precondition was not met by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A value fell outside the domain of a numerical routine.
    #[error("numerical domain error: {0}")]
    Domain(String),

    #[error("matrix is not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("imaginary residue {0:.3e} exceeds tolerance")]
    ImaginaryResidue(f64),

    #[error("metric is singular: condition number {cond:.3e} after ridge {ridge:.3e}")]
    SingularMetric { cond: f64, ridge: f64 },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("capability unavailable: {0}")]
    Capability(String),
}

impl Error {
    /// True for errors that come from the numerical domain rather than misuse.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::NotPsd(_)
                | Error::ImaginaryResidue(_)
                | Error::SingularMetric { .. }
                | Error::DegenerateModel(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
