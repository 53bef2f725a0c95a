//! Pauli strings and real-parameterized Hamiltonians built from them.

use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{contract, CMat, Complex64, Error, Result};

/// Largest register the dense representation supports.
pub const MAX_QUBITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// 2×2 matrix of the single-qubit operator.
    pub fn matrix(self) -> CMat {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match self {
            Pauli::I => CMat::from_row_slice(2, 2, &[l, o, o, l]),
            Pauli::X => CMat::from_row_slice(2, 2, &[o, l, l, o]),
            Pauli::Y => CMat::from_row_slice(2, 2, &[o, -i, i, o]),
            Pauli::Z => CMat::from_row_slice(2, 2, &[l, o, o, -l]),
        }
    }
}

/// Tensor product of single-qubit Paulis; letter 0 acts on the most
/// significant factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Result<Self> {
        if letters.is_empty() {
            return contract("a Pauli string needs at least one qubit");
        }
        if letters.len() > MAX_QUBITS {
            return contract(format!(
                "{} qubits exceeds the dense limit of {MAX_QUBITS}",
                letters.len()
            ));
        }
        Ok(PauliString { letters })
    }

    pub fn identity(n_qubits: usize) -> Result<Self> {
        Self::new(vec![Pauli::I; n_qubits])
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&p| p != Pauli::I).count()
    }

    pub fn is_identity(&self) -> bool {
        self.weight() == 0
    }

    /// True when the two strings commute as operators.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let clashes = self
            .letters
            .iter()
            .zip(&other.letters)
            .filter(|(a, b)| **a != Pauli::I && **b != Pauli::I && a != b)
            .count();
        clashes % 2 == 0
    }

    /// Sign s with Pᵀ = s·P. Only Y is antisymmetric, so s = (−1)^{#Y}.
    pub fn transpose_sign(&self) -> f64 {
        let ys = self.letters.iter().filter(|&&p| p == Pauli::Y).count();
        if ys % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Dense 2^n × 2^n matrix. Each row has exactly one nonzero entry, so the
    /// result is built directly rather than through repeated Kronecker products.
    pub fn dense(&self) -> CMat {
        let n = self.n_qubits();
        let dim = 1usize << n;
        let mut xmask = 0usize;
        for (q, p) in self.letters.iter().enumerate() {
            if matches!(p, Pauli::X | Pauli::Y) {
                xmask |= 1 << (n - 1 - q);
            }
        }
        let mut m = CMat::zeros(dim, dim);
        for row in 0..dim {
            let col = row ^ xmask;
            let mut phase = Complex64::new(1.0, 0.0);
            for (q, p) in self.letters.iter().enumerate() {
                let bit = (row >> (n - 1 - q)) & 1;
                match p {
                    Pauli::I | Pauli::X => {}
                    Pauli::Y => phase *= Complex64::new(0.0, if bit == 1 { 1.0 } else { -1.0 }),
                    Pauli::Z => {
                        if bit == 1 {
                            phase = -phase
                        }
                    }
                }
            }
            m[(row, col)] = phase;
        }
        m
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .trim()
            .chars()
            .map(|c| {
                Pauli::from_char(c.to_ascii_uppercase())
                    .ok_or_else(|| Error::Contract(format!("invalid Pauli letter {c:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        PauliString::new(letters)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

/// Dense matrix of a Pauli string.
pub fn pauli_dense(p: &PauliString) -> CMat {
    p.dense()
}

/// Ordered list of Pauli terms; coefficients are supplied at assembly time.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamHamiltonian {
    n_qubits: usize,
    terms: Vec<PauliString>,
}

impl ParamHamiltonian {
    pub fn new(n_qubits: usize, terms: Vec<PauliString>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return contract(format!("n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}"));
        }
        if let Some(t) = terms.iter().find(|t| t.n_qubits() != n_qubits) {
            return contract(format!("term {t} does not act on {n_qubits} qubits"));
        }
        Ok(ParamHamiltonian { n_qubits, terms })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn dense_terms(&self) -> Vec<CMat> {
        self.terms.iter().map(PauliString::dense).collect()
    }

    /// Σ_j c_j P_j. Every Pauli matrix is exactly conjugate-symmetric and the
    /// coefficients are real, so the sum is too.
    pub fn assemble(&self, c: &[f64]) -> Result<CMat> {
        assemble_dense(self.dim(), &self.dense_terms(), c)
    }
}

/// Σ_j c_j terms_j for pre-built dense terms.
pub fn assemble_dense(dim: usize, terms: &[CMat], c: &[f64]) -> Result<CMat> {
    if terms.len() != c.len() {
        return contract(format!(
            "coefficient vector has length {} but there are {} terms",
            c.len(),
            terms.len()
        ));
    }
    let mut m = CMat::zeros(dim, dim);
    for (t, &cj) in terms.iter().zip(c) {
        m.zip_apply(t, |a, b| *a += b * cj);
    }
    Ok(m)
}

/// Real linear combination of Pauli strings used as a measured observable.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    pub fn new(n_qubits: usize, terms: Vec<(f64, PauliString)>) -> Result<Self> {
        if let Some((_, t)) = terms.iter().find(|(_, t)| t.n_qubits() != n_qubits) {
            return contract(format!("term {t} does not act on {n_qubits} qubits"));
        }
        Ok(PauliSum { n_qubits, terms })
    }

    /// Parses `"0.5*ZZ + -1.2*XI + YY"`; a bare string has coefficient 1.
    pub fn parse(s: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for part in s.split('+').map(str::trim).filter(|p| !p.is_empty()) {
            let (c, p) = match part.split_once('*') {
                Some((c, p)) => {
                    let c: f64 = c
                        .trim()
                        .parse()
                        .map_err(|_| Error::Contract(format!("bad coefficient in {part:?}")))?;
                    (c, p.trim())
                }
                None => match part.strip_prefix('-') {
                    Some(p) => (-1.0, p.trim()),
                    None => (1.0, part),
                },
            };
            terms.push((c, p.parse::<PauliString>()?));
        }
        let n = match terms.first() {
            Some((_, t)) => t.n_qubits(),
            None => return contract("observable has no terms"),
        };
        PauliSum::new(n, terms)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn dense(&self) -> CMat {
        let dim = 1 << self.n_qubits;
        let mut m = CMat::zeros(dim, dim);
        for (c, p) in &self.terms {
            m += p.dense() * Complex64::new(*c, 0.0);
        }
        m
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (c, p)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c:?}*{p}")?;
        }
        Ok(())
    }
}

/// Generator terms, evolution terms and initial coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub g: ParamHamiltonian,
    pub h: ParamHamiltonian,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl Model {
    pub fn new(g: ParamHamiltonian, h: ParamHamiltonian, theta: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if g.n_qubits() != h.n_qubits() {
            return contract("G and H act on different numbers of qubits");
        }
        if theta.len() != g.len() || phi.len() != h.len() {
            return contract("initial coefficients do not match the number of terms");
        }
        Ok(Model { g, h, theta, phi })
    }

    pub fn n_qubits(&self) -> usize {
        self.g.n_qubits()
    }

    pub fn j(&self) -> usize {
        self.g.len()
    }

    pub fn k(&self) -> usize {
        self.h.len()
    }
}

fn random_string(n: usize, rng: &mut ChaCha8Rng) -> PauliString {
    let u: f64 = rng.random();
    let w = if u < 0.5 {
        1
    } else if u < 0.85 {
        2
    } else {
        rng.random_range(1..=n)
    }
    .min(n);
    let mut qubits: Vec<usize> = (0..n).collect();
    qubits.shuffle(rng);
    let mut letters = vec![Pauli::I; n];
    for &q in &qubits[..w] {
        letters[q] = [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)];
    }
    PauliString { letters }
}

fn all_strings(n: usize) -> impl Iterator<Item = PauliString> {
    (1..(1usize << (2 * n))).map(move |code| {
        let letters = (0..n)
            .map(|q| match (code >> (2 * (n - 1 - q))) & 3 {
                0 => Pauli::I,
                1 => Pauli::X,
                2 => Pauli::Y,
                _ => Pauli::Z,
            })
            .collect();
        PauliString { letters }
    })
}

/// Deterministic random model with distinct, mostly 1- and 2-local terms and at
/// least one anticommuting (G_j, H_k) pair.
pub fn random_model(n_qubits: usize, j: usize, k: usize, coeff_scale: f64, seed: u64) -> Result<Model> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return contract(format!("n_qubits must be in 1..={MAX_QUBITS}"));
    }
    if j == 0 || k == 0 {
        return contract("random_model needs at least one G term and one H term");
    }
    if !(coeff_scale.is_finite() && coeff_scale >= 0.0) {
        return contract("coeff_scale must be finite and nonnegative");
    }
    let available = (1usize << (2 * n_qubits)) - 1;
    if j + k > available {
        return contract(format!(
            "{} distinct non-identity strings requested but only {available} exist on {n_qubits} qubits",
            j + k
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<PauliString> = Vec::with_capacity(j + k);
    let mut attempts = 0;
    while chosen.len() < j + k && attempts < 10_000 {
        attempts += 1;
        let s = random_string(n_qubits, &mut rng);
        if !chosen.contains(&s) {
            chosen.push(s);
        }
    }
    if chosen.len() < j + k {
        let mut rest: Vec<PauliString> = all_strings(n_qubits).filter(|s| !chosen.contains(s)).collect();
        rest.shuffle(&mut rng);
        chosen.extend(rest.into_iter().take(j + k - chosen.len()));
    }
    let h_terms = chosen.split_off(j);
    let mut g_terms = chosen;
    let mut h_terms = h_terms;

    let nontrivial = g_terms.iter().any(|g| h_terms.iter().any(|h| !g.commutes_with(h)));
    if !nontrivial {
        // Swap the last H term for a string that anticommutes with G_0.
        let taken = |s: &PauliString, g: &[PauliString], h: &[PauliString]| g.contains(s) || h[..h.len() - 1].contains(s);
        let mut candidates: Vec<PauliString> = all_strings(n_qubits)
            .filter(|s| !s.commutes_with(&g_terms[0]) && !taken(s, &g_terms, &h_terms))
            .collect();
        candidates.sort_by_key(|s| s.weight());
        let min_w = candidates.first().map(|s| s.weight());
        candidates.retain(|s| Some(s.weight()) == min_w);
        match candidates.choose(&mut rng) {
            Some(s) => {
                let last = h_terms.len() - 1;
                h_terms[last] = s.clone();
            }
            None => {
                // Every anticommuting string is already a G term; move one over.
                let pos = g_terms
                    .iter()
                    .position(|s| !s.commutes_with(&g_terms[0]))
                    .ok_or_else(|| Error::Contract("cannot build a non-commuting model".into()))?;
                let last = h_terms.len() - 1;
                std::mem::swap(&mut g_terms[pos], &mut h_terms[last]);
            }
        }
    }

    let theta = (0..j).map(|_| rng.random_range(-1.0..=1.0) * coeff_scale).collect();
    let phi = (0..k).map(|_| rng.random_range(-1.0..=1.0) * coeff_scale).collect();
    Model::new(
        ParamHamiltonian::new(n_qubits, g_terms)?,
        ParamHamiltonian::new(n_qubits, h_terms)?,
        theta,
        phi,
    )
}
