//! Shot-level simulation of the Hadamard-test estimators.
//!
//! Every circuit is evolved exactly at the density-matrix level; only the
//! sampled times and the final measurement outcomes are random. The system
//! register is kept as a block matrix over the ancilla basis,
//! `Σ |j⟩⟨k| ⊗ B_jk`, so controlled gates act blockwise.
//!
//! Composite quantities (gradient entries, information-matrix entries) are
//! sums of terms `scale × E[sample]`, each sample bounded in [−1, 1] and
//! estimated with its own Hoeffding budget.

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::gradients::{GenModTarget, GradVector, Param};
use crate::info::{Block, InfoKind};
use crate::linalg::{self, eigh, tr_prod, EigSystem};
use crate::pauli::{assemble_dense, PauliSum};
use crate::quadrature::{tent_gauss_rule, unit_interval_rule, Rule};
use crate::state::{EqbmState, HptTable};
use crate::{contract, CMat, Complex64, Error, RMat, Result};

/// Tolerance for Hermitian-unitary checks on primitive inputs.
pub const UNITARY_TOL: f64 = 1e-10;

/// Shots needed for ε-accuracy with probability 1 − δ on samples in [−1, 1].
pub fn hoeffding_shots(epsilon: f64, delta: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return contract(format!("precision must be positive, got {epsilon}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return contract(format!("failure probability must lie in (0, 1), got {delta}"));
    }
    Ok(((2.0 * (2.0 / delta).ln() / (epsilon * epsilon)).ceil() as u64).max(1))
}

/// How a plan's (ε, δ) is spread over the terms of a composite estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    /// Every term gets (ε, δ); the composite bound is Σ|scale|·ε.
    PerTerm,
    /// Term t gets ε/(T·|scale_t|) and δ/T, so the composite bound is ε.
    SplitEqual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotPlan {
    pub epsilon: f64,
    pub delta: f64,
    pub shots: u64,
    pub seed: u64,
    pub budget: Budget,
    /// Whether thermofield-double preparation is available.
    pub purification: bool,
}

impl ShotPlan {
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Result<Self> {
        Ok(ShotPlan {
            epsilon,
            delta,
            shots: hoeffding_shots(epsilon, delta)?,
            seed,
            budget: Budget::PerTerm,
            purification: true,
        })
    }

    /// Fixed shot count; ε is the Hoeffding precision this count buys at δ.
    pub fn with_shots(shots: u64, delta: f64, seed: u64) -> Result<Self> {
        if shots == 0 {
            return contract("shot count must be at least 1");
        }
        hoeffding_shots(1.0, delta)?;
        Ok(ShotPlan {
            epsilon: (2.0 * (2.0 / delta).ln() / shots as f64).sqrt(),
            delta,
            shots,
            seed,
            budget: Budget::PerTerm,
            purification: true,
        })
    }

    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }

    pub fn without_purification(mut self) -> Self {
        self.purification = false;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// (ε_t, δ_t, N_t) for each term of a composite with the given scales.
    pub fn allocate(&self, scales: &[f64]) -> Result<Vec<(f64, f64, u64)>> {
        match self.budget {
            Budget::PerTerm => Ok(scales.iter().map(|_| (self.epsilon, self.delta, self.shots)).collect()),
            Budget::SplitEqual => {
                let t = scales.len() as f64;
                scales
                    .iter()
                    .map(|s| {
                        let e = self.epsilon / (t * s.abs());
                        let d = self.delta / t;
                        Ok((e, d, hoeffding_shots(e, d)?))
                    })
                    .collect()
            }
        }
    }
}

/// Distribution of a sampled evolution time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeLaw {
    /// Tent density p(t) on the real line.
    Tent,
    /// Uniform on [0, 1].
    Uniform,
}

impl TimeLaw {
    fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            TimeLaw::Tent => HptTable::get().sample(rng),
            TimeLaw::Uniform => rng.random::<f64>(),
        }
    }

    fn rule(self) -> &'static Rule {
        static TENT: OnceLock<Rule> = OnceLock::new();
        static UNIT: OnceLock<Rule> = OnceLock::new();
        match self {
            TimeLaw::Tent => TENT.get_or_init(|| tent_gauss_rule(64)),
            TimeLaw::Uniform => UNIT.get_or_init(|| unit_interval_rule(24)),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Gate {
    Had(usize),
    S(usize),
    /// Controlled system unitary, control on the given ancilla.
    Ctrl(usize, CMat),
    /// Unitary on the system register.
    Sys(CMat),
}

#[derive(Debug, Clone)]
struct Choice {
    prob: f64,
    op: CMat,
    eig: EigSystem,
}

/// Observable measured on the system register. With several choices, one is
/// drawn per shot with its probability (used for G(θ) via |θ_ℓ|/‖θ‖₁).
#[derive(Debug, Clone)]
pub struct Readout {
    choices: Vec<Choice>,
}

impl Readout {
    pub fn observable(op: CMat) -> Result<Self> {
        linalg::check_hermitian(&op)?;
        let eig = eigh(&op)?;
        Ok(Readout { choices: vec![Choice { prob: 1.0, op, eig }] })
    }

    /// Readout of Σ w_ℓ P_ℓ / ‖w‖₁; returns it with ‖w‖₁.
    pub fn weighted(terms: &[(f64, &CMat)]) -> Result<(Self, f64)> {
        let l1: f64 = terms.iter().map(|(w, _)| w.abs()).sum();
        if l1 == 0.0 {
            return Err(Error::DegenerateModel("all measured coefficients are zero".into()));
        }
        let mut choices = Vec::new();
        for &(w, p) in terms {
            if w == 0.0 {
                continue;
            }
            let op = p * Complex64::new(w.signum(), 0.0);
            linalg::check_hermitian(&op)?;
            let eig = eigh(&op)?;
            choices.push(Choice { prob: w.abs() / l1, op, eig });
        }
        Ok((Readout { choices }, l1))
    }

    fn mean(&self, b: &CMat) -> Complex64 {
        self.choices.iter().map(|c| tr_prod(&c.op, b) * c.prob).sum()
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> &Choice {
        if self.choices.len() == 1 {
            return &self.choices[0];
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for c in &self.choices {
            acc += c.prob;
            if u < acc {
                return c;
            }
        }
        self.choices.last().expect("readout has choices")
    }
}

/// Ancilla initialization, gate sequence and final measurement.
#[derive(Debug, Clone)]
pub struct Circuit {
    pub init: Vec<bool>,
    pub gates: Vec<Gate>,
    pub readout: Arc<Readout>,
}

struct Register {
    m: usize,
    blocks: Vec<CMat>,
}

fn had() -> [[Complex64; 2]; 2] {
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

fn s_gate() -> [[Complex64; 2]; 2] {
    let z = Complex64::new(0.0, 0.0);
    [[Complex64::new(1.0, 0.0), z], [z, Complex64::new(0.0, 1.0)]]
}

impl Register {
    fn new(init: &[bool], rho: &CMat) -> Self {
        let m = 1usize << init.len();
        let idx = init.iter().enumerate().fold(0, |acc, (q, &b)| acc | ((b as usize) << q));
        let d = rho.nrows();
        let mut blocks = vec![CMat::zeros(d, d); m * m];
        blocks[idx * m + idx] = rho.clone();
        Register { m, blocks }
    }

    fn ancilla_gate(&mut self, q: usize, g: [[Complex64; 2]; 2]) {
        let m = self.m;
        let d = self.blocks[0].nrows();
        let mut out = vec![CMat::zeros(d, d); m * m];
        let mask = !(1usize << q);
        for j in 0..m {
            for k in 0..m {
                let (jq, kq) = ((j >> q) & 1, (k >> q) & 1);
                let target = &mut out[j * m + k];
                for x in 0..2 {
                    for y in 0..2 {
                        let c = g[jq][x] * g[kq][y].conj();
                        if c.norm() == 0.0 {
                            continue;
                        }
                        let src = ((j & mask) | (x << q)) * m + ((k & mask) | (y << q));
                        target.zip_apply(&self.blocks[src], |t, s| *t += c * s);
                    }
                }
            }
        }
        self.blocks = out;
    }

    fn apply(&mut self, gate: &Gate) {
        let m = self.m;
        match gate {
            Gate::Had(q) => self.ancilla_gate(*q, had()),
            Gate::S(q) => self.ancilla_gate(*q, s_gate()),
            Gate::Ctrl(q, u) => {
                let ud = u.adjoint();
                for j in 0..m {
                    for k in 0..m {
                        let b = &mut self.blocks[j * m + k];
                        if (j >> q) & 1 == 1 {
                            *b = u * &*b;
                        }
                        if (k >> q) & 1 == 1 {
                            *b = &*b * &ud;
                        }
                    }
                }
            }
            Gate::Sys(v) => {
                let vd = v.adjoint();
                for b in &mut self.blocks {
                    *b = v * &*b * &vd;
                }
            }
        }
    }

    fn diag(&self, b: usize) -> &CMat {
        &self.blocks[b * self.m + b]
    }
}

fn parity(b: usize) -> f64 {
    if b.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn evolve(rho: &CMat, c: &Circuit) -> Register {
    let mut r = Register::new(&c.init, rho);
    for g in &c.gates {
        r.apply(g);
    }
    r
}

/// Exact expectation of the ±-signed sample of `c` run on `rho`.
pub fn circuit_mean(rho: &CMat, c: &Circuit) -> Result<f64> {
    let r = evolve(rho, c);
    let z: Complex64 = (0..r.m).map(|b| c.readout.mean(r.diag(b)) * parity(b)).sum();
    linalg::real_part(z, 1e-9)
}

/// One Born-rule sample: ancillas in Z, system in the eigenbasis of the readout.
pub fn circuit_sample<R: Rng + ?Sized>(rho: &CMat, c: &Circuit, rng: &mut R) -> f64 {
    let r = evolve(rho, c);
    let choice = c.readout.pick(rng);
    let v = &choice.eig.vectors;
    let d = v.nrows();
    let mut outcomes = Vec::with_capacity(r.m * d);
    for b in 0..r.m {
        let bb = r.diag(b);
        let w = bb * v;
        for i in 0..d {
            let p: Complex64 = (0..d).map(|row| v[(row, i)].conj() * w[(row, i)]).sum();
            outcomes.push((p.re.max(0.0), parity(b) * choice.eig.values[i]));
        }
    }
    let total: f64 = outcomes.iter().map(|o| o.0).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for &(p, val) in &outcomes {
        acc += p;
        if u < acc {
            return val;
        }
    }
    outcomes.iter().rev().find(|o| o.0 > 0.0).map_or(0.0, |o| o.1)
}

/// The Hadamard-test primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    /// −½⟨{U₀, O}⟩ with the control in |1⟩, +½⟨{U₀, O}⟩ with |0⟩.
    Anticomm,
    /// (i/2)⟨[U₀, O]⟩ with the control in |1⟩.
    Comm,
    /// ¼⟨[[U₁, O], U₀]⟩ with both controls in |1⟩.
    NestedComm,
    /// (i/4)⟨{U₀, [O, U₁]}⟩ with both controls in |1⟩.
    NestedAcommComm,
}

impl Primitive {
    pub fn ancillas(self) -> usize {
        match self {
            Primitive::Anticomm | Primitive::Comm => 1,
            Primitive::NestedComm | Primitive::NestedAcommComm => 2,
        }
    }
}

fn check_hermitian_unitary(u: &CMat, name: &str) -> Result<()> {
    if u.nrows() != u.ncols() {
        return contract(format!("{name} is not square"));
    }
    if linalg::max_abs_diff(u, &u.adjoint()) > UNITARY_TOL || !linalg::is_unitary(u, UNITARY_TOL) {
        return contract(format!("{name} must be unitary and Hermitian"));
    }
    Ok(())
}

pub fn primitive_circuit(
    kind: Primitive,
    u0: &CMat,
    u1: Option<&CMat>,
    obs: &CMat,
    ctrl_init: &[bool],
) -> Result<Circuit> {
    check_hermitian_unitary(u0, "U0")?;
    if ctrl_init.len() != kind.ancillas() {
        return contract(format!("{kind:?} needs {} control bits", kind.ancillas()));
    }
    if u0.shape() != obs.shape() {
        return contract("U0 and the observable have different dimensions");
    }
    let mut gates = vec![Gate::Had(0)];
    match kind {
        Primitive::Anticomm => gates.push(Gate::Ctrl(0, u0.clone())),
        Primitive::Comm => gates.extend([Gate::S(0), Gate::Ctrl(0, u0.clone())]),
        Primitive::NestedComm | Primitive::NestedAcommComm => {
            let u1 = match u1 {
                Some(u) => u,
                None => return contract("nested primitives need U1"),
            };
            check_hermitian_unitary(u1, "U1")?;
            if u1.shape() != obs.shape() {
                return contract("U1 and the observable have different dimensions");
            }
            if kind == Primitive::NestedComm {
                gates.push(Gate::S(0));
            }
            gates.extend([Gate::Had(1), Gate::S(1), Gate::Ctrl(0, u0.clone()), Gate::Ctrl(1, u1.clone())]);
            gates.push(Gate::Had(1));
        }
    }
    gates.push(Gate::Had(0));
    Ok(Circuit { init: ctrl_init.to_vec(), gates, readout: Arc::new(Readout::observable(obs.clone())?) })
}

/// One sample of a primitive circuit run on `rho`.
pub fn primitive<R: Rng + ?Sized>(
    kind: Primitive,
    rho: &CMat,
    u0: &CMat,
    u1: Option<&CMat>,
    obs: &CMat,
    ctrl_init: &[bool],
    rng: &mut R,
) -> Result<f64> {
    let c = primitive_circuit(kind, u0, u1, obs, ctrl_init)?;
    if rho.shape() != obs.shape() {
        return contract("state and observable have different dimensions");
    }
    Ok(circuit_sample(rho, &c, rng))
}

/// Random experiment with ±1-bounded samples and sampled evolution times.
pub trait Experiment: Send + Sync {
    fn times(&self) -> &[TimeLaw];
    /// E[sample | times].
    fn mean_given(&self, t: &[f64]) -> Result<f64>;
    fn sample_given(&self, t: &[f64], rng: &mut ChaCha8Rng) -> Result<f64>;
}

type Builder<'a> = Box<dyn Fn(&[f64]) -> Result<Circuit> + Send + Sync + 'a>;
type PairBuilder<'a> = Box<dyn Fn(&[f64]) -> (CMat, CMat) + Send + Sync + 'a>;

/// Ancilla-controlled circuit on a prepared system state.
pub struct HadamardTest<'a> {
    rho: CMat,
    times: Vec<TimeLaw>,
    build: Builder<'a>,
}

impl<'a> HadamardTest<'a> {
    pub fn new(rho: CMat, times: Vec<TimeLaw>, build: impl Fn(&[f64]) -> Result<Circuit> + Send + Sync + 'a) -> Self {
        HadamardTest { rho, times, build: Box::new(build) }
    }
}

impl Experiment for HadamardTest<'_> {
    fn times(&self) -> &[TimeLaw] {
        &self.times
    }

    fn mean_given(&self, t: &[f64]) -> Result<f64> {
        circuit_mean(&self.rho, &(self.build)(t)?)
    }

    fn sample_given(&self, t: &[f64], rng: &mut ChaCha8Rng) -> Result<f64> {
        Ok(circuit_sample(&self.rho, &(self.build)(t)?, rng))
    }
}

/// Local evolutions U₁ ⊗ U₂ on a purification followed by a product Pauli
/// measurement P₁ ⊗ P₂ (outcome is the product of the two ±1 results).
pub struct PurifiedTest<'a> {
    /// d×d matrix M with ψ = vec(M), i.e. ψ = (M ⊗ I)|Γ⟩.
    psi: CMat,
    times: Vec<TimeLaw>,
    build: PairBuilder<'a>,
    p1: CMat,
    p2: CMat,
}

impl<'a> PurifiedTest<'a> {
    pub fn new(
        psi: CMat,
        times: Vec<TimeLaw>,
        p1: CMat,
        p2: CMat,
        build: impl Fn(&[f64]) -> (CMat, CMat) + Send + Sync + 'a,
    ) -> Self {
        PurifiedTest { psi, times, build: Box::new(build), p1, p2 }
    }

    fn expectation(&self, t: &[f64]) -> Result<f64> {
        let (u1, u2) = (self.build)(t);
        // (U₁ ⊗ U₂) vec(M) = vec(U₁ M U₂ᵀ)
        let m = u1 * &self.psi * u2.transpose();
        let pm = &self.p1 * &m * self.p2.transpose();
        let z: Complex64 = m.iter().zip(pm.iter()).map(|(a, b)| a.conj() * b).sum();
        linalg::real_part(z, 1e-9)
    }
}

impl Experiment for PurifiedTest<'_> {
    fn times(&self) -> &[TimeLaw] {
        &self.times
    }

    fn mean_given(&self, t: &[f64]) -> Result<f64> {
        self.expectation(t)
    }

    fn sample_given(&self, t: &[f64], rng: &mut ChaCha8Rng) -> Result<f64> {
        let e = self.expectation(t)?.clamp(-1.0, 1.0);
        Ok(if rng.random::<f64>() < 0.5 * (1.0 + e) { 1.0 } else { -1.0 })
    }
}

/// Product of two independent measurements, each on a fresh copy of its state.
pub struct ProductTest {
    a: (CMat, Circuit),
    b: (CMat, Circuit),
}

impl ProductTest {
    pub fn new(rho_a: CMat, readout_a: Readout, rho_b: CMat, readout_b: Readout) -> Self {
        let direct = |r: Readout| Circuit { init: vec![], gates: vec![], readout: Arc::new(r) };
        ProductTest { a: (rho_a, direct(readout_a)), b: (rho_b, direct(readout_b)) }
    }
}

impl Experiment for ProductTest {
    fn times(&self) -> &[TimeLaw] {
        &[]
    }

    fn mean_given(&self, _: &[f64]) -> Result<f64> {
        Ok(circuit_mean(&self.a.0, &self.a.1)? * circuit_mean(&self.b.0, &self.b.1)?)
    }

    fn sample_given(&self, _: &[f64], rng: &mut ChaCha8Rng) -> Result<f64> {
        Ok(circuit_sample(&self.a.0, &self.a.1, rng) * circuit_sample(&self.b.0, &self.b.1, rng))
    }
}

/// One bounded term of a composite estimate.
pub struct Term<'a> {
    /// Circuit identifier, e.g. "fb-tt" or "product".
    pub label: String,
    pub scale: f64,
    pub exp: Box<dyn Experiment + 'a>,
}

impl<'a> Term<'a> {
    fn new(label: &str, scale: f64, exp: impl Experiment + 'a) -> Self {
        Term { label: label.to_string(), scale, exp: Box::new(exp) }
    }
}

/// E[sample] by tensor-product quadrature over the sampled times.
pub fn exact_mean(exp: &dyn Experiment) -> Result<f64> {
    let laws = exp.times();
    let rules: Vec<&Rule> = laws.iter().map(|l| l.rule()).collect();
    let mut idx = vec![0usize; rules.len()];
    let mut t = vec![0.0; rules.len()];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for (d, r) in rules.iter().enumerate() {
            t[d] = r.nodes[idx[d]];
            w *= r.weights[idx[d]];
        }
        total += w * exp.mean_given(&t)?;
        let mut d = 0;
        loop {
            if d == rules.len() {
                return Ok(total);
            }
            idx[d] += 1;
            if idx[d] < rules[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Σ scale · E[sample] over the terms.
pub fn exact_value(terms: &[Term]) -> Result<f64> {
    terms.iter().map(|t| Ok(t.scale * exact_mean(t.exp.as_ref())?)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotOutcome {
    pub label: String,
    pub estimate: f64,
    pub n_used: u64,
    pub scale: f64,
    pub raw_mean: f64,
    pub stderr: f64,
    pub epsilon: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub estimate: f64,
    pub terms: Vec<ShotOutcome>,
    /// Σ |scale_t| ε_t: the estimate is within this of its mean with
    /// probability at least 1 − `delta_bound`.
    pub epsilon_bound: f64,
    pub delta_bound: f64,
    pub stderr: f64,
    pub shots: u64,
    pub wall_time: f64,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for a term, derived from the plan seed, a tag naming the estimated
/// quantity, and the term's position.
pub fn term_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix(splitmix(seed ^ splitmix(tag)) ^ index)
}

pub(crate) fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let (a, b) = x.split_at(x.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Samples of one experiment; shot s draws from stream s of the term's seed.
pub fn draw_samples(exp: &dyn Experiment, seed: u64, shots: u64) -> Result<Vec<f64>> {
    let laws = exp.times();
    (0..shots)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            let t: Vec<f64> = laws.iter().map(|l| l.sample(&mut rng)).collect();
            exp.sample_given(&t, &mut rng)
        })
        .collect()
}

/// Runs every term with its budget and combines the rescaled means.
pub fn run_terms(terms: &[Term], plan: &ShotPlan, tag: u64) -> Result<Estimate> {
    if terms.is_empty() {
        return Ok(Estimate {
            estimate: 0.0,
            terms: vec![],
            epsilon_bound: 0.0,
            delta_bound: 0.0,
            stderr: 0.0,
            shots: 0,
            wall_time: 0.0,
        });
    }
    let start = Instant::now();
    let scales: Vec<f64> = terms.iter().map(|t| t.scale).collect();
    let alloc = plan.allocate(&scales)?;
    let mut outcomes = Vec::with_capacity(terms.len());
    for (i, (term, &(eps, delta, n))) in terms.iter().zip(&alloc).enumerate() {
        let samples = draw_samples(term.exp.as_ref(), term_seed(plan.seed, tag, i as u64), n)?;
        let mean = pairwise_sum(&samples) / n as f64;
        let var = if n > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        outcomes.push(ShotOutcome {
            label: term.label.clone(),
            estimate: term.scale * mean,
            n_used: n,
            scale: term.scale,
            raw_mean: mean,
            stderr: (var / n as f64).sqrt(),
            epsilon: eps,
            delta,
        });
    }
    Ok(Estimate {
        estimate: outcomes.iter().map(|o| o.estimate).sum(),
        epsilon_bound: outcomes.iter().map(|o| o.scale.abs() * o.epsilon).sum(),
        delta_bound: outcomes.iter().map(|o| o.delta).sum::<f64>().min(1.0),
        stderr: outcomes.iter().map(|o| (o.scale * o.stderr).powi(2)).sum::<f64>().sqrt(),
        shots: outcomes.iter().map(|o| o.n_used).sum(),
        terms: outcomes,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

// Circuit builders. Each doc comment states the expectation of its sample.

fn readout(op: &CMat) -> Arc<Readout> {
    Arc::new(Readout::observable(op.clone()).expect("Pauli terms are Hermitian"))
}

/// Readout of G(θ) by ℓ-sampling, with ‖θ‖₁.
fn g_readout(s: &EqbmState) -> Result<(Arc<Readout>, f64)> {
    let terms: Vec<(f64, &CMat)> = s.theta().iter().zip(&s.model().g_terms).map(|(&w, m)| (w, m)).collect();
    let (r, l1) = Readout::weighted(&terms)?;
    Ok((Arc::new(r), l1))
}

fn e_g(s: &EqbmState, t: f64) -> CMat {
    s.g_evolution(t, 1.0)
}

fn e_g_half(s: &EqbmState, t: f64) -> CMat {
    s.g_evolution(t, 0.5)
}

fn e_h(s: &EqbmState, t: f64) -> CMat {
    s.h_evolution(t)
}

fn check_index(i: usize, n: usize, what: &str) -> Result<()> {
    if i >= n {
        return contract(format!("{what} index {i} out of range ({n})"));
    }
    Ok(())
}

/// −½⟨{e^{iH} P e^{−iH}, Φ_θ(G_j)}⟩_ρ.
pub fn gsee_theta_circuit<'a>(s: &'a EqbmState, j: usize, p: &CMat) -> HadamardTest<'a> {
    let (gj, ro) = (s.g_term(j).clone(), readout(p));
    HadamardTest::new(s.rho().clone(), vec![TimeLaw::Tent], move |t| {
        Ok(Circuit {
            init: vec![true],
            gates: vec![
                Gate::Had(0),
                Gate::Ctrl(0, gj.clone()),
                Gate::Sys(e_g(s, t[0])),
                Gate::Sys(e_h(s, 1.0)),
                Gate::Had(0),
            ],
            readout: ro.clone(),
        })
    })
}

/// (i/2)⟨[Ψ_φ(H_k), P]⟩_ω.
pub fn gsee_phi_circuit<'a>(s: &'a EqbmState, k: usize, p: &CMat) -> HadamardTest<'a> {
    let (hk, ro) = (s.h_term(k).clone(), readout(p));
    HadamardTest::new(s.omega().clone(), vec![TimeLaw::Uniform], move |t| {
        Ok(Circuit {
            init: vec![true],
            gates: vec![
                Gate::Sys(e_h(s, -t[0])),
                Gate::Had(0),
                Gate::S(0),
                Gate::Ctrl(0, hk.clone()),
                Gate::Sys(e_h(s, t[0])),
                Gate::Had(0),
            ],
            readout: ro.clone(),
        })
    })
}

/// (i/2)⟨[G(θ), Ψ_φ†(H_k)]⟩_{η(φ)} / ‖θ‖₁.
pub fn genmod_phi_circuit<'a>(s: &'a EqbmState, eta: &CMat, k: usize) -> Result<HadamardTest<'a>> {
    let (ro, _) = g_readout(s)?;
    let hk = s.h_term(k).clone();
    Ok(HadamardTest::new(eta.clone(), vec![TimeLaw::Uniform], move |t| {
        Ok(Circuit {
            init: vec![false],
            gates: vec![
                Gate::Sys(e_h(s, -(1.0 - t[0]))),
                Gate::Had(0),
                Gate::S(0),
                Gate::Ctrl(0, hk.clone()),
                Gate::Sys(e_h(s, -t[0])),
                Gate::Had(0),
            ],
            readout: ro.clone(),
        })
    }))
}

/// ½⟨{Φ_θ(G_i), Φ_θ(G_j)}⟩_ρ.
pub fn fb_tt_circuit<'a>(s: &'a EqbmState, i: usize, j: usize) -> HadamardTest<'a> {
    let (gi, ro) = (s.g_term(i).clone(), readout(s.g_term(j)));
    HadamardTest::new(s.rho().clone(), vec![TimeLaw::Tent, TimeLaw::Tent], move |t| {
        Ok(Circuit {
            init: vec![false],
            gates: vec![Gate::Had(0), Gate::Ctrl(0, gi.clone()), Gate::Sys(e_g(s, t[0] - t[1])), Gate::Had(0)],
            readout: ro.clone(),
        })
    })
}

/// ¼⟨[[Ψ_φ†(H_j), G(θ)], Φ_θ(Ψ_φ†(H_i))]⟩_ρ / ‖θ‖₁. Times (t₁, t₂, t₃).
pub fn fb_pp_circuit<'a>(s: &'a EqbmState, i: usize, j: usize) -> Result<HadamardTest<'a>> {
    let (ro, _) = g_readout(s)?;
    let (hi, hj) = (s.h_term(i).clone(), s.h_term(j).clone());
    let laws = vec![TimeLaw::Uniform, TimeLaw::Tent, TimeLaw::Uniform];
    Ok(HadamardTest::new(s.rho().clone(), laws, move |t| {
        Ok(Circuit {
            init: vec![true, true],
            gates: vec![
                Gate::Had(0),
                Gate::S(0),
                Gate::Had(1),
                Gate::S(1),
                Gate::Sys(e_h(s, t[2])),
                Gate::Ctrl(0, hi.clone()),
                Gate::Sys(e_h(s, -t[2])),
                Gate::Sys(e_g(s, t[1])),
                Gate::Sys(e_h(s, t[0])),
                Gate::Ctrl(1, hj.clone()),
                Gate::Sys(e_h(s, -t[0])),
                Gate::Had(0),
                Gate::Had(1),
            ],
            readout: ro.clone(),
        })
    }))
}

/// (i/2)⟨[Φ_θ(G_i), Ψ_φ†(H_j)]⟩_ρ. Times (t₁ tent, t₂ uniform).
pub fn fb_tp_circuit<'a>(s: &'a EqbmState, i: usize, j: usize) -> HadamardTest<'a> {
    let (hj, ro) = (s.h_term(j).clone(), readout(s.g_term(i)));
    HadamardTest::new(s.rho().clone(), vec![TimeLaw::Tent, TimeLaw::Uniform], move |t| {
        Ok(Circuit {
            init: vec![false],
            gates: vec![
                Gate::Had(0),
                Gate::S(0),
                Gate::Sys(e_h(s, t[1])),
                Gate::Ctrl(0, hj.clone()),
                Gate::Sys(e_h(s, -t[1])),
                Gate::Sys(e_g(s, -t[0])),
                Gate::Had(0),
            ],
            readout: ro.clone(),
        })
    })
}

/// Σ_l c_l s_l P_l with s_l the transpose sign of each Pauli string.
fn transposed_generator(s: &EqbmState, h_side: bool) -> Result<EigSystem> {
    let m = &s.model().model;
    let (strings, coeffs) = if h_side { (m.h.terms(), s.phi()) } else { (m.g.terms(), s.theta()) };
    let terms: Vec<CMat> = strings.iter().map(|p| p.dense() * Complex64::new(p.transpose_sign(), 0.0)).collect();
    eigh(&assemble_dense(s.dim(), &terms, coeffs)?)
}

fn transposed_term(s: &EqbmState, idx: usize, h_side: bool) -> CMat {
    let m = &s.model().model;
    let p = if h_side { &m.h.terms()[idx] } else { &m.g.terms()[idx] };
    p.dense() * Complex64::new(p.transpose_sign(), 0.0)
}

/// Tr[Φ_{θ/2}(G_i) √ρ Φ_{θ/2}(G_j) √ρ], on the purification of ρ(θ).
/// The second register evolves under G^T(θ/2), assembled from transposed
/// Pauli strings.
pub fn wy_tt_tfd_circuit<'a>(s: &'a EqbmState, i: usize, j: usize) -> Result<PurifiedTest<'a>> {
    let gt = transposed_generator(s, false)?;
    let p2 = transposed_term(s, j, false);
    Ok(PurifiedTest::new(
        s.sqrt_rho().clone(),
        vec![TimeLaw::Tent, TimeLaw::Tent],
        s.g_term(i).clone(),
        p2,
        move |t| (e_g_half(s, -t[0]), gt.evolution(0.5 * t[1])),
    ))
}

/// ½⟨{Φ_{θ/2}(G_i), Φ_{θ/2}(G_j)}⟩_ρ.
pub fn wy_tt_circuit<'a>(s: &'a EqbmState, i: usize, j: usize) -> HadamardTest<'a> {
    let (gj, ro) = (s.g_term(j).clone(), readout(s.g_term(i)));
    HadamardTest::new(s.rho().clone(), vec![TimeLaw::Tent, TimeLaw::Tent], move |t| {
        Ok(Circuit {
            init: vec![false],
            gates: vec![Gate::Had(0), Gate::Ctrl(0, gj.clone()), Gate::Sys(e_g_half(s, t[0] - t[1])), Gate::Had(0)],
            readout: ro.clone(),
        })
    })
}

/// Tr[Ψ_φ†(H_j) √ρ Ψ_φ†(H_i) √ρ], on the purification of ρ(θ).
pub fn wy_pp_tfd_circuit<'a>(s: &'a EqbmState, i: usize, j: usize) -> Result<PurifiedTest<'a>> {
    let ht = transposed_generator(s, true)?;
    let p2 = transposed_term(s, i, true);
    Ok(PurifiedTest::new(
        s.sqrt_rho().clone(),
        vec![TimeLaw::Uniform, TimeLaw::Uniform],
        s.h_term(j).clone(),
        p2,
        move |t| (e_h(s, t[0]), ht.evolution(-t[1])),
    ))
}

/// ½⟨{Ψ_φ†(H_i), Ψ_φ†(H_j)}⟩_ρ.
pub fn wy_pp_circuit<'a>(s: &'a EqbmState, i: usize, j: usize) -> HadamardTest<'a> {
    let (hj, ro) = (s.h_term(j).clone(), readout(s.h_term(i)));
    HadamardTest::new(s.rho().clone(), vec![TimeLaw::Uniform, TimeLaw::Uniform], move |t| {
        Ok(Circuit {
            init: vec![false],
            gates: vec![
                Gate::Sys(e_h(s, t[0])),
                Gate::Had(0),
                Gate::Ctrl(0, hj.clone()),
                Gate::Sys(e_h(s, t[1] - t[0])),
                Gate::Had(0),
            ],
            readout: ro.clone(),
        })
    })
}

/// (i/2)⟨[Φ_{θ/2}(G_j), Ψ_φ†(H_i)]⟩_ρ for H index i and G index j.
/// Times (t₁ tent, t₂ uniform).
pub fn wy_tp_circuit<'a>(s: &'a EqbmState, i: usize, j: usize) -> HadamardTest<'a> {
    let (hi, ro) = (s.h_term(i).clone(), readout(s.g_term(j)));
    HadamardTest::new(s.rho().clone(), vec![TimeLaw::Tent, TimeLaw::Uniform], move |t| {
        Ok(Circuit {
            init: vec![false],
            gates: vec![
                Gate::Had(0),
                Gate::S(0),
                Gate::Sys(e_h(s, t[1])),
                Gate::Ctrl(0, hi.clone()),
                Gate::Sys(e_h(s, -t[1])),
                Gate::Sys(e_g_half(s, -t[0])),
                Gate::Had(0),
            ],
            readout: ro.clone(),
        })
    })
}

/// ½⟨{G_i, Φ_θ(G_j)}⟩_ρ.
pub fn km_tt_circuit<'a>(s: &'a EqbmState, i: usize, j: usize) -> HadamardTest<'a> {
    let (gj, ro) = (s.g_term(j).clone(), readout(s.g_term(i)));
    HadamardTest::new(s.rho().clone(), vec![TimeLaw::Tent], move |t| {
        Ok(Circuit {
            init: vec![false],
            gates: vec![Gate::Had(0), Gate::Ctrl(0, gj.clone()), Gate::Sys(e_g(s, t[0])), Gate::Had(0)],
            readout: ro.clone(),
        })
    })
}

/// ¼⟨[[Ψ_φ†(H_j), G(θ)], Ψ_φ†(H_i)]⟩_ρ / ‖θ‖₁.
pub fn km_pp_circuit<'a>(s: &'a EqbmState, i: usize, j: usize) -> Result<HadamardTest<'a>> {
    let (ro, _) = g_readout(s)?;
    let (hi, hj) = (s.h_term(i).clone(), s.h_term(j).clone());
    Ok(HadamardTest::new(s.rho().clone(), vec![TimeLaw::Uniform, TimeLaw::Uniform], move |t| {
        Ok(Circuit {
            init: vec![true, true],
            gates: vec![
                Gate::Had(0),
                Gate::S(0),
                Gate::Had(1),
                Gate::S(1),
                Gate::Sys(e_h(s, t[1])),
                Gate::Ctrl(0, hi.clone()),
                Gate::Sys(e_h(s, t[0] - t[1])),
                Gate::Ctrl(1, hj.clone()),
                Gate::Sys(e_h(s, -t[0])),
                Gate::Had(0),
                Gate::Had(1),
            ],
            readout: ro.clone(),
        })
    }))
}

/// (i/4)⟨{Φ_θ(G_i), [G(θ), Ψ_φ†(H_j)]}⟩_ρ / ‖θ‖₁. Times (t₁ tent, t₂ uniform).
pub fn km_tp_circuit<'a>(s: &'a EqbmState, i: usize, j: usize) -> Result<HadamardTest<'a>> {
    let (ro, _) = g_readout(s)?;
    let (gi, hj) = (s.g_term(i).clone(), s.h_term(j).clone());
    Ok(HadamardTest::new(s.rho().clone(), vec![TimeLaw::Tent, TimeLaw::Uniform], move |t| {
        Ok(Circuit {
            init: vec![true, true],
            gates: vec![
                Gate::Had(0),
                Gate::Had(1),
                Gate::S(1),
                Gate::Ctrl(0, gi.clone()),
                Gate::Sys(e_g(s, t[0])),
                Gate::Sys(e_h(s, t[1])),
                Gate::Ctrl(1, hj.clone()),
                Gate::Sys(e_h(s, -t[1])),
                Gate::Had(0),
                Gate::Had(1),
            ],
            readout: ro.clone(),
        })
    }))
}

/// ⟨A⟩_σ⟨B⟩_τ from independent copies.
fn product(sigma: &CMat, a: &CMat, tau: &CMat, b: &CMat) -> Result<ProductTest> {
    Ok(ProductTest::new(sigma.clone(), Readout::observable(a.clone())?, tau.clone(), Readout::observable(b.clone())?))
}

/// Single measurement of `op` on `sigma`.
fn direct(sigma: &CMat, op: &CMat) -> Result<HadamardTest<'static>> {
    let ro = Arc::new(Readout::observable(op.clone())?);
    Ok(HadamardTest::new(sigma.clone(), vec![], move |_| Ok(Circuit { init: vec![], gates: vec![], readout: ro.clone() })))
}

fn check_observable(s: &EqbmState, o: &PauliSum) -> Result<()> {
    if o.n_qubits() != s.model().model.n_qubits() {
        return contract(format!(
            "observable acts on {} qubits, model on {}",
            o.n_qubits(),
            s.model().model.n_qubits()
        ));
    }
    Ok(())
}

/// Terms of ∂/∂γ Tr[O ω], one or two per non-identity Pauli term of O.
pub fn gsee_grad_terms<'a>(s: &'a EqbmState, o: &PauliSum, which: Param) -> Result<Vec<Term<'a>>> {
    check_observable(s, o)?;
    let mut terms = Vec::new();
    for (c, p) in o.terms() {
        if p.is_identity() || *c == 0.0 {
            continue;
        }
        let pm = p.dense();
        match which {
            Param::Theta(j) => {
                check_index(j, s.j(), "θ")?;
                terms.push(Term::new("gsee-theta", *c, gsee_theta_circuit(s, j, &pm)));
                terms.push(Term::new("product", *c, product(s.omega(), &pm, s.rho(), s.g_term(j))?));
            }
            Param::Phi(k) => {
                check_index(k, s.k(), "φ")?;
                terms.push(Term::new("gsee-phi", 2.0 * c, gsee_phi_circuit(s, k, &pm)));
            }
        }
    }
    Ok(terms)
}

/// Terms of ∂/∂φ_k D(η‖ω): 2‖θ‖₁ times the genmod-phi circuit.
pub fn genmod_grad_phi_terms<'a>(s: &'a EqbmState, target: &GenModTarget, k: usize) -> Result<Vec<Term<'a>>> {
    check_index(k, s.k(), "φ")?;
    check_target(s, target)?;
    let l1 = g_readout(s)?.1;
    Ok(vec![Term::new("genmod-phi", 2.0 * l1, genmod_phi_circuit(s, target.eta(), k)?)])
}

/// Terms of ∂/∂θ_j D(η‖ω): ⟨G_j⟩_{η(φ)} − ⟨G_j⟩_ρ.
pub fn genmod_grad_theta_terms<'a>(s: &'a EqbmState, target: &GenModTarget, j: usize) -> Result<Vec<Term<'a>>> {
    check_index(j, s.j(), "θ")?;
    check_target(s, target)?;
    let eta_phi = target.evolved(s)?;
    Ok(vec![
        Term::new("eta", 1.0, direct(&eta_phi, s.g_term(j))?),
        Term::new("rho", -1.0, direct(s.rho(), s.g_term(j))?),
    ])
}

fn check_target(s: &EqbmState, target: &GenModTarget) -> Result<()> {
    if target.eta().nrows() != s.dim() {
        return contract("target dimension does not match the model");
    }
    Ok(())
}

/// Terms of one information-matrix entry. θφ entries are addressed as
/// (θ index i, φ index j).
pub fn info_entry_terms<'a>(
    s: &'a EqbmState,
    kind: InfoKind,
    block: Block,
    i: usize,
    j: usize,
    purification: bool,
) -> Result<Vec<Term<'a>>> {
    match block {
        Block::ThetaTheta => {
            check_index(i, s.j(), "θ")?;
            check_index(j, s.j(), "θ")?;
        }
        Block::PhiPhi => {
            check_index(i, s.k(), "φ")?;
            check_index(j, s.k(), "φ")?;
        }
        Block::ThetaPhi => {
            check_index(i, s.j(), "θ")?;
            check_index(j, s.k(), "φ")?;
        }
    }
    let needs_purification = kind == InfoKind::Wy && block != Block::ThetaPhi;
    if needs_purification && !purification {
        return Err(Error::Capability(format!(
            "WY {block} entries need the thermofield-double state, which this plan does not provide"
        )));
    }
    let cov = || product(s.rho(), s.g_term(i), s.rho(), s.g_term(j));
    let l1 = || Ok::<f64, Error>(g_readout(s)?.1);
    Ok(match (kind, block) {
        (InfoKind::Fb, Block::ThetaTheta) => vec![Term::new("fb-tt", 1.0, fb_tt_circuit(s, i, j)), Term::new("product", -1.0, cov()?)],
        (InfoKind::Fb, Block::PhiPhi) => vec![Term::new("fb-pp", 4.0 * l1()?, fb_pp_circuit(s, i, j)?)],
        (InfoKind::Fb, Block::ThetaPhi) => vec![Term::new("fb-tp", 2.0, fb_tp_circuit(s, i, j))],
        (InfoKind::Wy, Block::ThetaTheta) => vec![
            Term::new("wy-tt-tfd", 0.5, wy_tt_tfd_circuit(s, i, j)?),
            Term::new("wy-tt", 0.5, wy_tt_circuit(s, i, j)),
            Term::new("product", -1.0, cov()?),
        ],
        (InfoKind::Wy, Block::PhiPhi) => vec![Term::new("wy-pp-tfd", -8.0, wy_pp_tfd_circuit(s, i, j)?), Term::new("wy-pp", 8.0, wy_pp_circuit(s, i, j))],
        (InfoKind::Wy, Block::ThetaPhi) => vec![Term::new("wy-tp", 2.0, wy_tp_circuit(s, j, i))],
        (InfoKind::Km, Block::ThetaTheta) => vec![Term::new("km-tt", 1.0, km_tt_circuit(s, i, j)), Term::new("product", -1.0, cov()?)],
        (InfoKind::Km, Block::PhiPhi) => vec![Term::new("km-pp", 4.0 * l1()?, km_pp_circuit(s, i, j)?)],
        (InfoKind::Km, Block::ThetaPhi) => vec![Term::new("km-tp", 2.0 * l1()?, km_tp_circuit(s, i, j)?)],
    })
}

fn tag(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED, |acc, &p| splitmix(acc ^ p))
}

fn kind_code(kind: InfoKind) -> u64 {
    match kind {
        InfoKind::Fb => 1,
        InfoKind::Wy => 2,
        InfoKind::Km => 3,
    }
}

fn block_code(block: Block) -> u64 {
    match block {
        Block::ThetaTheta => 1,
        Block::PhiPhi => 2,
        Block::ThetaPhi => 3,
    }
}

pub fn estimate_gsee_grad(s: &EqbmState, o: &PauliSum, which: Param, plan: &ShotPlan) -> Result<Estimate> {
    let terms = gsee_grad_terms(s, o, which)?;
    run_terms(&terms, plan, tag(&[10, which.flat_index(s.j()) as u64]))
}

pub fn estimate_genmod_grad_phi(s: &EqbmState, target: &GenModTarget, k: usize, plan: &ShotPlan) -> Result<Estimate> {
    let terms = genmod_grad_phi_terms(s, target, k)?;
    run_terms(&terms, plan, tag(&[20, k as u64]))
}

pub fn estimate_genmod_grad_theta(s: &EqbmState, target: &GenModTarget, j: usize, plan: &ShotPlan) -> Result<Estimate> {
    let terms = genmod_grad_theta_terms(s, target, j)?;
    run_terms(&terms, plan, tag(&[21, j as u64]))
}

pub fn estimate_info_entry(
    s: &EqbmState,
    kind: InfoKind,
    block: Block,
    i: usize,
    j: usize,
    plan: &ShotPlan,
) -> Result<Estimate> {
    let terms = info_entry_terms(s, kind, block, i, j, plan.purification)?;
    run_terms(&terms, plan, tag(&[30, kind_code(kind), block_code(block), i as u64, j as u64]))
}

/// Shot-based gradient of Tr[O ω].
pub fn estimate_gsee_gradient(s: &EqbmState, o: &PauliSum, plan: &ShotPlan) -> Result<GradVector> {
    let v: Vec<f64> = (0..s.j() + s.k())
        .map(|p| Ok(estimate_gsee_grad(s, o, Param::from_flat(p, s.j()), plan)?.estimate))
        .collect::<Result<_>>()?;
    Ok(GradVector::from_slice(&v, s.j()))
}

/// Shot-based gradient of D(η‖ω).
pub fn estimate_genmod_gradient(s: &EqbmState, target: &GenModTarget, plan: &ShotPlan) -> Result<GradVector> {
    let mut g = GradVector::zeros(s.j(), s.k());
    for j in 0..s.j() {
        g.theta[j] = estimate_genmod_grad_theta(s, target, j, plan)?.estimate;
    }
    for k in 0..s.k() {
        g.phi[k] = estimate_genmod_grad_phi(s, target, k, plan)?.estimate;
    }
    Ok(g)
}

/// Shot-based information matrix; each entry on or above the diagonal is
/// estimated once and mirrored.
pub fn estimate_info_matrix(s: &EqbmState, kind: InfoKind, plan: &ShotPlan) -> Result<RMat> {
    let (jn, kn) = (s.j(), s.k());
    let mut m = RMat::zeros(jn + kn, jn + kn);
    for a in 0..jn + kn {
        for b in a..jn + kn {
            let v = match (a < jn, b < jn) {
                (true, true) => estimate_info_entry(s, kind, Block::ThetaTheta, a, b, plan)?,
                (true, false) => estimate_info_entry(s, kind, Block::ThetaPhi, a, b - jn, plan)?,
                _ => estimate_info_entry(s, kind, Block::PhiPhi, a - jn, b - jn, plan)?,
            }
            .estimate;
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradients::{genmod_grad, gsee_grad};
    use crate::info::info_matrix;
    use crate::linalg::{acomm, comm, expect};
    use crate::pauli::{Model, ParamHamiltonian, PauliString};
    use crate::state::{resolve, DenseModel};
    use crate::testutil::{random_density, random_hermitian, random_state};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn pauli(s: &str) -> CMat {
        s.parse::<PauliString>().unwrap().dense()
    }

    fn ket_density(v: [Complex64; 2]) -> CMat {
        let k = nalgebra::DVector::from_column_slice(&v);
        &k * k.adjoint()
    }

    #[test]
    fn hoeffding_shot_count() {
        assert_eq!(hoeffding_shots(0.1, 0.05).unwrap(), 738);
        assert_eq!(hoeffding_shots(10.0, 0.9).unwrap(), 1);
        assert!(hoeffding_shots(0.0, 0.05).is_err());
        assert!(hoeffding_shots(0.1, 1.0).is_err());
        let p = ShotPlan::with_shots(738, 0.05, 0).unwrap();
        assert!(p.epsilon <= 0.1 && p.epsilon > 0.0999);
    }

    #[test]
    fn split_budget_allocation() {
        let p = ShotPlan::new(0.1, 0.05, 1).unwrap().with_budget(Budget::SplitEqual);
        let a = p.allocate(&[1.0, -2.0]).unwrap();
        assert!((a[0].0 - 0.05).abs() < 1e-15 && (a[1].0 - 0.025).abs() < 1e-15);
        assert_eq!(a[0].1, 0.025);
        let total: f64 = a.iter().zip([1.0, 2.0]).map(|(x, s)| x.0 * s).sum();
        assert!((total - 0.1).abs() < 1e-15);
    }

    #[test]
    fn primitive_spec_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zero = ket_density([c(1.0), c(0.0)]);
        let z = pauli("Z");
        for _ in 0..200 {
            let v = primitive(Primitive::Anticomm, &zero, &z, None, &z, &[true], &mut rng).unwrap();
            assert_eq!(v, -1.0);
        }
        let cm = primitive_circuit(Primitive::Comm, &z, None, &z, &[true]).unwrap();
        assert!(circuit_mean(&zero, &cm).unwrap().abs() < 1e-15);
        let plus_i = ket_density([c(std::f64::consts::FRAC_1_SQRT_2), Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2)]);
        let x = pauli("X");
        let cx = primitive_circuit(Primitive::Comm, &x, None, &z, &[true]).unwrap();
        assert!((circuit_mean(&plus_i, &cx).unwrap() - 1.0).abs() < 1e-14);
        let mean: f64 = (0..500).map(|_| circuit_sample(&plus_i, &cx, &mut rng)).sum::<f64>() / 500.0;
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn primitive_means_match_trace_identities() {
        let i = Complex64::new(0.0, 1.0);
        for seed in 0..10 {
            let rho = random_density(4, seed);
            let o = random_hermitian(4, 100 + seed);
            let u0 = pauli(["XY", "ZZ", "YI", "IX"][seed as usize % 4]);
            let u1 = pauli(["ZX", "XX", "IY", "YZ"][seed as usize % 4]);
            let ev = |a: &CMat| expect(a, &rho);
            let cases = [
                (Primitive::Anticomm, vec![true], ev(&acomm(&u0, &o)) * -0.5),
                (Primitive::Anticomm, vec![false], ev(&acomm(&u0, &o)) * 0.5),
                (Primitive::Comm, vec![true], ev(&comm(&u0, &o)) * i * 0.5),
                (Primitive::Comm, vec![false], ev(&comm(&u0, &o)) * i * -0.5),
                (Primitive::NestedComm, vec![true, true], ev(&comm(&comm(&u1, &o), &u0)) * 0.25),
                (Primitive::NestedAcommComm, vec![true, true], ev(&acomm(&u0, &comm(&o, &u1))) * i * 0.25),
            ];
            for (kind, init, want) in cases {
                let circ = primitive_circuit(kind, &u0, Some(&u1), &o, &init).unwrap();
                let got = circuit_mean(&rho, &circ).unwrap();
                assert!(want.im.abs() < 1e-12);
                assert!((got - want.re).abs() < 1e-12, "{kind:?} {init:?}: {got} vs {}", want.re);
            }
        }
    }

    #[test]
    fn primitive_rejects_non_unitary() {
        let z = pauli("Z");
        let bad = &z * c(0.5);
        assert!(matches!(primitive_circuit(Primitive::Comm, &bad, None, &z, &[true]), Err(Error::Contract(_))));
        let nonherm = pauli("X") * Complex64::new(0.0, 1.0);
        assert!(primitive_circuit(Primitive::Anticomm, &nonherm, None, &z, &[true]).is_err());
        assert!(primitive_circuit(Primitive::NestedComm, &z, None, &z, &[true, true]).is_err());
        assert!(primitive_circuit(Primitive::Comm, &z, None, &z, &[true, false]).is_err());
    }

    #[test]
    fn sampling_matches_exact_mean() {
        let s = random_state(2, 2, 2, 3);
        let t = km_pp_circuit(&s, 0, 1).unwrap();
        let times = [0.3, 0.8];
        let exact = t.mean_given(&times).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 20_000;
        let mean: f64 = (0..n).map(|_| t.sample_given(&times, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - exact).abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn composites_are_unbiased_for_every_entry() {
        let s = random_state(2, 2, 2, 21);
        for kind in InfoKind::ALL {
            let m = info_matrix(&s, kind).unwrap();
            for (block, i, j, r, col) in [
                (Block::ThetaTheta, 0, 1, 0, 1),
                (Block::ThetaTheta, 1, 1, 1, 1),
                (Block::PhiPhi, 1, 0, 3, 2),
                (Block::ThetaPhi, 1, 0, 1, 2),
                (Block::ThetaPhi, 0, 1, 0, 3),
            ] {
                let terms = info_entry_terms(&s, kind, block, i, j, true).unwrap();
                let v = exact_value(&terms).unwrap();
                assert!((v - m.matrix()[(r, col)]).abs() < 1e-8, "{kind} {block} ({i},{j}): {v} vs {}", m.matrix()[(r, col)]);
            }
        }
    }

    #[test]
    fn gradient_composites_are_unbiased() {
        let s = random_state(2, 2, 2, 5);
        let o = PauliSum::parse("0.7*ZX + -0.4*YY + 0.2*II").unwrap();
        let g = gsee_grad(&s, &o.dense()).unwrap();
        for p in 0..4 {
            let which = Param::from_flat(p, 2);
            let v = exact_value(&gsee_grad_terms(&s, &o, which).unwrap()).unwrap();
            assert!((v - g.get(which)).abs() < 1e-8);
        }
        let tgt = GenModTarget::new(random_density(4, 77)).unwrap();
        let gg = genmod_grad(&s, &tgt).unwrap();
        for k in 0..2 {
            let v = exact_value(&genmod_grad_phi_terms(&s, &tgt, k).unwrap()).unwrap();
            assert!((v - gg.phi[k]).abs() < 1e-8);
            let v = exact_value(&genmod_grad_theta_terms(&s, &tgt, k).unwrap()).unwrap();
            assert!((v - gg.theta[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn transpose_rule_for_purified_circuit() {
        let s = random_state(2, 3, 1, 13);
        let half: Vec<CMat> = (0..3).map(|j| s.phi_channel(s.g_term(j), true).unwrap()).collect();
        let sr = s.sqrt_rho();
        for (i, j) in [(0, 1), (2, 2), (1, 0)] {
            let want = tr_prod(&(&half[i] * sr), &(&half[j] * sr)).re;
            let got = exact_mean(&wy_tt_tfd_circuit(&s, i, j).unwrap()).unwrap();
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn capability_and_degenerate_errors() {
        let s = random_state(2, 2, 2, 1);
        let plan = ShotPlan::new(0.5, 0.1, 1).unwrap().without_purification();
        assert!(matches!(
            estimate_info_entry(&s, InfoKind::Wy, Block::ThetaTheta, 0, 0, &plan),
            Err(Error::Capability(_))
        ));
        assert!(estimate_info_entry(&s, InfoKind::Wy, Block::ThetaPhi, 0, 0, &plan).is_ok());
        let dm = s.model().clone();
        let zero = resolve(&dm, &[0.0, 0.0], s.phi()).unwrap();
        let tgt = GenModTarget::new(random_density(4, 2)).unwrap();
        assert!(matches!(genmod_grad_phi_terms(&zero, &tgt, 0), Err(Error::DegenerateModel(_))));
        assert!(info_entry_terms(&s, InfoKind::Fb, Block::PhiPhi, 2, 0, true).is_err());
    }

    #[test]
    fn estimates_are_reproducible() {
        let s = random_state(2, 2, 2, 4);
        let plan = ShotPlan::new(0.2, 0.05, 42).unwrap();
        let a = estimate_info_entry(&s, InfoKind::Km, Block::ThetaPhi, 0, 1, &plan).unwrap();
        let b = estimate_info_entry(&s, InfoKind::Km, Block::ThetaPhi, 0, 1, &plan).unwrap();
        assert_eq!(a.estimate, b.estimate);
        let c = estimate_info_entry(&s, InfoKind::Km, Block::ThetaPhi, 0, 1, &plan.with_seed(43)).unwrap();
        assert_ne!(a.estimate, c.estimate);
        assert_eq!(a.terms[0].n_used, hoeffding_shots(0.2, 0.05).unwrap());
        assert!((a.estimate - a.terms[0].scale * a.terms[0].raw_mean).abs() < 1e-15);
    }

    #[test]
    fn commuting_phi_gradient_is_zero() {
        let g = ParamHamiltonian::new(2, vec!["ZI".parse().unwrap(), "IZ".parse().unwrap()]).unwrap();
        let h = ParamHamiltonian::new(2, vec!["ZZ".parse().unwrap()]).unwrap();
        let m = Model::new(g, h, vec![0.4, -0.3], vec![0.8]).unwrap();
        let s = resolve(&DenseModel::new(m), &[0.4, -0.3], &[0.8]).unwrap();
        let o = PauliSum::parse("ZZ + 0.5*ZI").unwrap();
        let plan = ShotPlan::new(0.1, 0.05, 3).unwrap();
        let e = estimate_gsee_grad(&s, &o, Param::Phi(0), &plan).unwrap();
        assert!(e.estimate.abs() <= e.epsilon_bound);
        assert!(exact_value(&gsee_grad_terms(&s, &o, Param::Phi(0)).unwrap()).unwrap().abs() < 1e-14);
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let x: Vec<f64> = (0..1001).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(pairwise_sum(&x), x.iter().sum::<f64>());
    }
}
