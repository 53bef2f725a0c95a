//! Invariant suites behind `eqbm verify`.

use std::path::Path;

use clap::ValueEnum;
use eqbm::estimators::{
    exact_value, genmod_grad_phi_terms, genmod_grad_theta_terms, gsee_grad_terms, estimate_info_entry, info_entry_terms,
    ShotPlan,
};
use eqbm::gradients::{d_omega, genmod_grad, gsee_grad, gsee_value, relent_value, GenModTarget, Param};
use eqbm::info::{info_matrix, Block, InfoKind};
use eqbm::linalg::sym_eigvals;
use eqbm::oracle::{central_difference, hessian_info, purified_fb, spectral_info, DEFAULT_HESSIAN_STEP};
use eqbm::pauli::{random_model, Model, ParamHamiltonian, PauliSum};
use eqbm::state::{resolve, DenseModel, EqbmState};
use eqbm::{CMat, Complex64, RMat};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{emit, Provenance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Gradients,
    Metrics,
    Loewner,
    Purification,
    Estimators,
    All,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub enum Relation {
    #[serde(rename = "max<=")]
    AtMost,
    #[serde(rename = "min>=")]
    AtLeast,
}

#[derive(Debug, Serialize)]
pub struct Row {
    pub suite: Suite,
    pub check: String,
    pub cases: usize,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

struct Acc {
    suite: Suite,
    check: String,
    relation: Relation,
    bound: f64,
    value: f64,
    cases: usize,
}

impl Acc {
    fn max(suite: Suite, check: &str, bound: f64) -> Self {
        Acc { suite, check: check.into(), relation: Relation::AtMost, bound, value: 0.0, cases: 0 }
    }

    fn min(suite: Suite, check: &str, bound: f64) -> Self {
        Acc { suite, check: check.into(), relation: Relation::AtLeast, bound, value: f64::INFINITY, cases: 0 }
    }

    fn add(&mut self, v: f64) {
        self.cases += 1;
        self.value = match self.relation {
            Relation::AtMost => if v.is_nan() { f64::INFINITY } else { self.value.max(v) },
            Relation::AtLeast => if v.is_nan() { f64::NEG_INFINITY } else { self.value.min(v) },
        };
    }

    fn row(self) -> Row {
        let pass = self.cases > 0
            && match self.relation {
                Relation::AtMost => self.value <= self.bound,
                Relation::AtLeast => self.value >= self.bound,
            };
        Row { suite: self.suite, check: self.check, cases: self.cases, value: self.value, relation: self.relation, bound: self.bound, pass }
    }
}

/// Model shape for suite seed s: n ∈ {1, 2, 3}, J, K ≤ 3.
fn suite_model(seed: u64) -> CliResult<Model> {
    let n = 1 + (seed % 3) as usize;
    let (j, k) = if n == 1 { (1 + (seed / 3 % 2) as usize, 1) } else { (1 + (seed / 3 % 3) as usize, 1 + (seed / 5 % 3) as usize) };
    Ok(random_model(n, j, k, 1.0, 1000 + seed)?)
}

fn suite_state(seed: u64) -> CliResult<EqbmState> {
    let m = suite_model(seed)?;
    let (t, p) = (m.theta.clone(), m.phi.clone());
    Ok(resolve(&DenseModel::new(m), &t, &p)?)
}

fn suite_observable(n: usize, seed: u64) -> CliResult<PauliSum> {
    let j = if n == 1 { 2 } else { 3 };
    let m = random_model(n, j, 1, 1.0, 5000 + seed)?;
    let terms = m.g.terms().iter().cloned().zip(m.theta.iter().copied()).map(|(p, c)| (c, p)).collect();
    Ok(PauliSum::new(n, terms)?)
}

fn suite_target(n: usize, seed: u64) -> CliResult<GenModTarget> {
    let m = random_model(n, 1, 1, 1.0, 9000 + seed)?;
    let (t, p) = (m.theta.clone(), m.phi.clone());
    let s = resolve(&DenseModel::new(m), &t, &p)?;
    Ok(GenModTarget::new(s.omega().clone())?)
}

/// err / allowed, with allowed = 1e−6·|fd| or 1e−8 when |fd| < 1e−2.
pub fn fd_ratio(analytic: f64, fd: f64) -> f64 {
    let allowed = if fd.abs() < 1e-2 { 1e-8 } else { 1e-6 * fd.abs() };
    (analytic - fd).abs() / allowed
}

const FD_STEP: f64 = 1e-5;

fn gradients(seeds: u64) -> CliResult<Vec<Row>> {
    let mut gsee = Acc::max(Suite::Gradients, "gsee gradient vs central differences (error/allowed)", 1.0);
    let mut genmod = Acc::max(Suite::Gradients, "genmod gradient vs central differences (error/allowed)", 1.0);
    let mut state_fd = Acc::max(Suite::Gradients, "state derivative vs central differences (error/allowed)", 1.0);
    for seed in 0..seeds {
        let s = suite_state(seed)?;
        let model = s.model().clone();
        let (jn, n) = (s.j(), model.model.n_qubits());
        let gamma: Vec<f64> = s.theta().iter().chain(s.phi()).copied().collect();
        let at = |g: &[f64]| resolve(&model, &g[..jn], &g[jn..]);
        let o = suite_observable(n, seed)?.dense();
        let tgt = suite_target(n, seed)?;
        let fd = central_difference(|g| gsee_value(&at(g)?, &o), &gamma, FD_STEP, false)?;
        for (a, f) in gsee_grad(&s, &o)?.to_vec().iter().zip(&fd) {
            gsee.add(fd_ratio(*a, *f));
        }
        let fd = central_difference(|g| relent_value(&at(g)?, &tgt), &gamma, FD_STEP, false)?;
        for (a, f) in genmod_grad(&s, &tgt)?.to_vec().iter().zip(&fd) {
            genmod.add(fd_ratio(*a, *f));
        }
        for p in 0..gamma.len() {
            let an = d_omega(&s, Param::from_flat(p, jn))?;
            let mut plus = gamma.clone();
            plus[p] += FD_STEP;
            let mut minus = gamma.clone();
            minus[p] -= FD_STEP;
            let fd = (at(&plus)?.omega() - at(&minus)?.omega()) / Complex64::new(2.0 * FD_STEP, 0.0);
            for (a, f) in an.iter().zip(fd.iter()) {
                state_fd.add(fd_ratio(a.re, f.re).max(fd_ratio(a.im, f.im)));
            }
        }
    }
    let mut zeros = Acc::max(Suite::Gradients, "forced zeros on commuting 1-qubit model", 1e-14);
    for theta in [0.3, -0.8, 1.5] {
        let g = ParamHamiltonian::new(1, vec!["Z".parse()?])?;
        let h = ParamHamiltonian::new(1, vec!["Z".parse()?])?;
        let dm = DenseModel::new(Model::new(g, h, vec![theta], vec![0.7])?);
        let s = resolve(&dm, &[theta], &[0.7])?;
        let o = PauliSum::parse("X + 0.5*Z + -0.2*Y")?.dense();
        zeros.add(gsee_grad(&s, &o)?.phi[0].abs());
        let eta = CMat::from_row_slice(2, 2, &[Complex64::new(0.6, 0.0), Complex64::new(0.1, 0.1), Complex64::new(0.1, -0.1), Complex64::new(0.4, 0.0)]);
        zeros.add(genmod_grad(&s, &GenModTarget::new(eta)?)?.phi[0].abs());
        for kind in InfoKind::ALL {
            let m = info_matrix(&s, kind)?;
            zeros.add(m.matrix()[(1, 1)].abs().max(m.matrix()[(0, 1)].abs()));
        }
    }
    Ok(vec![gsee.row(), genmod.row(), state_fd.row(), zeros.row()])
}

fn metrics(seeds: u64) -> CliResult<Vec<Row>> {
    let mut rows = Vec::new();
    for kind in InfoKind::ALL {
        let mut spec = Acc::max(Suite::Metrics, &format!("{kind} analytical vs spectral"), 1e-8);
        let mut hess = Acc::max(Suite::Metrics, &format!("{kind} analytical vs divergence Hessian"), 5e-4);
        for seed in 0..seeds {
            let s = suite_state(seed)?;
            let a = info_matrix(&s, kind)?;
            spec.add(a.max_abs_diff(&spectral_info(&s, kind)?));
            hess.add(a.max_abs_diff(&hessian_info(&s, kind, DEFAULT_HESSIAN_STEP)?));
        }
        rows.push(spec.row());
        rows.push(hess.row());
    }
    Ok(rows)
}

fn min_eig(m: &RMat) -> f64 {
    sym_eigvals(m).into_iter().fold(f64::INFINITY, f64::min)
}

fn loewner(seeds: u64) -> CliResult<Vec<Row>> {
    let mut upper = Acc::min(Suite::Loewner, "min eig(WY - FB)", -1e-8);
    let mut lower = Acc::min(Suite::Loewner, "min eig(FB - WY/2)", -1e-8);
    for seed in 0..seeds {
        let s = suite_state(seed)?;
        let fb = info_matrix(&s, InfoKind::Fb)?.matrix().clone();
        let wy = info_matrix(&s, InfoKind::Wy)?.matrix().clone();
        upper.add(min_eig(&(&wy - &fb)));
        lower.add(min_eig(&(&fb - &wy * 0.5)));
    }
    Ok(vec![upper.row(), lower.row()])
}

fn purification(seeds: u64) -> CliResult<Vec<Row>> {
    let mut acc = Acc::max(Suite::Purification, "max |WY - FB(purified family)|", 1e-7);
    for seed in 0..seeds {
        let s = suite_state(seed)?;
        let wy = info_matrix(&s, InfoKind::Wy)?;
        acc.add((wy.matrix() - purified_fb(&s)?).amax());
    }
    Ok(vec![acc.row()])
}

fn estimators(seeds: u64) -> CliResult<Vec<Row>> {
    let mut unbiased = Acc::max(Suite::Estimators, "quadrature mean of every circuit composite vs analytical", 1e-8);
    for seed in 0..seeds.min(3) {
        let m = random_model(2, 2, 2, 1.0, 2000 + seed)?;
        let (t, p) = (m.theta.clone(), m.phi.clone());
        let s = resolve(&DenseModel::new(m), &t, &p)?;
        for kind in InfoKind::ALL {
            let a = info_matrix(&s, kind)?;
            for (block, i, j, r, c) in [
                (Block::ThetaTheta, 0, 0, 0, 0),
                (Block::ThetaTheta, 0, 1, 0, 1),
                (Block::PhiPhi, 0, 1, 2, 3),
                (Block::PhiPhi, 1, 1, 3, 3),
                (Block::ThetaPhi, 0, 1, 0, 3),
                (Block::ThetaPhi, 1, 0, 1, 2),
            ] {
                let v = exact_value(&info_entry_terms(&s, kind, block, i, j, true)?)?;
                unbiased.add((v - a.matrix()[(r, c)]).abs());
            }
        }
        let o = suite_observable(2, seed)?;
        let g = gsee_grad(&s, &o.dense())?;
        let tgt = suite_target(2, seed)?;
        let gg = genmod_grad(&s, &tgt)?;
        for idx in 0..2 {
            for param in [Param::Theta(idx), Param::Phi(idx)] {
                unbiased.add((exact_value(&gsee_grad_terms(&s, &o, param)?)? - g.get(param)).abs());
            }
            unbiased.add((exact_value(&genmod_grad_theta_terms(&s, &tgt, idx)?)? - gg.theta[idx]).abs());
            unbiased.add((exact_value(&genmod_grad_phi_terms(&s, &tgt, idx)?)? - gg.phi[idx]).abs());
        }
    }
    let s = {
        let m = random_model(2, 2, 2, 1.0, 2000)?;
        let (t, p) = (m.theta.clone(), m.phi.clone());
        resolve(&DenseModel::new(m), &t, &p)?
    };
    let reference = info_matrix(&s, InfoKind::Fb)?.matrix()[(0, 1)];
    let runs = (20 * seeds).max(20);
    let mut failures = 0;
    let mut delta_bound = 0.0;
    for r in 0..runs {
        let e = estimate_info_entry(&s, InfoKind::Fb, Block::ThetaTheta, 0, 1, &ShotPlan::new(0.1, 0.05, r)?)?;
        delta_bound = e.delta_bound;
        if (e.estimate - reference).abs() > e.epsilon_bound {
            failures += 1;
        }
    }
    let mut rate = Acc::max(Suite::Estimators, &format!("Hoeffding failure rate over {runs} runs"), delta_bound + 0.03);
    rate.add(failures as f64 / runs as f64);
    Ok(vec![unbiased.row(), rate.row()])
}

pub fn rows(suite: Suite, seeds: u64) -> CliResult<Vec<Row>> {
    if seeds == 0 {
        return Err(CliError::usage("--seeds must be at least 1"));
    }
    Ok(match suite {
        Suite::Gradients => gradients(seeds)?,
        Suite::Metrics => metrics(seeds)?,
        Suite::Loewner => loewner(seeds)?,
        Suite::Purification => purification(seeds)?,
        Suite::Estimators => estimators(seeds)?,
        Suite::All => {
            let mut v = Vec::new();
            for s in [Suite::Gradients, Suite::Metrics, Suite::Loewner, Suite::Purification, Suite::Estimators] {
                v.extend(rows(s, seeds)?);
            }
            v
        }
    })
}

#[derive(Serialize)]
struct VerifyDoc {
    provenance: Provenance,
    suite: Suite,
    seeds: u64,
    pass: bool,
    rows: Vec<Row>,
}

pub fn run(suite: Suite, seeds: u64, out: Option<&Path>) -> CliResult<()> {
    let rows = rows(suite, seeds)?;
    let failed: Vec<String> = rows.iter().filter(|r| !r.pass).map(|r| r.check.clone()).collect();
    let doc = VerifyDoc { provenance: Provenance::new("verify", None), suite, seeds, pass: failed.is_empty(), rows };
    emit(&doc, out)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(failed.join("; ")))
    }
}
