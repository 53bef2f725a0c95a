//! Gradient and natural-gradient descent on EQBM parameters.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use crate::estimators::{estimate_genmod_gradient, estimate_gsee_gradient, term_seed, ShotPlan};
use crate::gradients::{genmod_grad, gsee_grad, gsee_value, relent_value, GenModTarget, GradVector};
use crate::info::{info_matrix, InfoKind};
use crate::pauli::PauliSum;
use crate::state::{resolve, DenseModel, EqbmState};
use crate::{contract, CMat, Error, RMat, Result};

/// Condition number above which a regularized metric counts as singular.
pub const MAX_CONDITION: f64 = 1e12;
/// Ridge used when none is configured, relative to trace(I)/dim.
pub const DEFAULT_RIDGE_FACTOR: f64 = 1e-6;
pub const DEFAULT_GRAD_TOL: f64 = 1e-8;
pub const MAX_HALVINGS: usize = 20;
pub const MONOTONE_SLACK: f64 = 1e-9;

pub enum Task {
    /// Minimize Tr[O ω].
    Gsee(PauliSum),
    /// Minimize D(η‖ω).
    GenMod(GenModTarget),
}

impl Task {
    fn check(&self, model: &DenseModel) -> Result<()> {
        let n = model.model.n_qubits();
        match self {
            Task::Gsee(o) if o.n_qubits() != n => {
                contract(format!("observable acts on {} qubits, model on {n}", o.n_qubits()))
            }
            Task::GenMod(t) if t.eta().nrows() != model.dim() => contract("target dimension does not match the model"),
            _ => Ok(()),
        }
    }

    pub fn objective(&self, s: &EqbmState) -> Result<f64> {
        match self {
            Task::Gsee(o) => gsee_value(s, &o.dense()),
            Task::GenMod(t) => relent_value(s, t),
        }
    }

    fn exact_gradient(&self, s: &EqbmState, o: Option<&CMat>) -> Result<GradVector> {
        match self {
            Task::Gsee(p) => match o {
                Some(o) => gsee_grad(s, o),
                None => gsee_grad(s, &p.dense()),
            },
            Task::GenMod(t) => genmod_grad(s, t),
        }
    }

    fn shot_gradient(&self, s: &EqbmState, plan: &ShotPlan) -> Result<GradVector> {
        match self {
            Task::Gsee(o) => estimate_gsee_gradient(s, o, plan),
            Task::GenMod(t) => estimate_genmod_gradient(s, t, plan),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Info(InfoKind),
    /// Unit metric; makes ngd coincide with gd.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Gd,
    Ngd(Metric),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Gd => write!(f, "gd"),
            Method::Ngd(Metric::Info(k)) => write!(f, "ngd-{}", k.to_string().to_lowercase()),
            Method::Ngd(Metric::Identity) => write!(f, "ngd-identity"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gd" => Ok(Method::Gd),
            "ngd-identity" => Ok(Method::Ngd(Metric::Identity)),
            other => match other.strip_prefix("ngd-") {
                Some(k) => Ok(Method::Ngd(Metric::Info(k.parse()?))),
                None => contract(format!("unknown method '{s}'")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Freeze {
    #[default]
    None,
    Theta,
    Phi,
}

impl FromStr for Freeze {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Freeze::None),
            "theta" | "θ" => Ok(Freeze::Theta),
            "phi" | "φ" => Ok(Freeze::Phi),
            _ => contract(format!("unknown freeze mode '{s}'")),
        }
    }
}

impl fmt::Display for Freeze {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Freeze::None => "none",
            Freeze::Theta => "theta",
            Freeze::Phi => "phi",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientSource {
    Exact,
    /// Shot estimates; iteration m uses a seed derived from the plan seed and m.
    Shots(ShotPlan),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub mu: f64,
    pub iters: usize,
    /// λ_reg; `None` means 1e−6·trace(I)/dim each iteration.
    pub ridge: Option<f64>,
    pub freeze: Freeze,
    pub gradient: GradientSource,
    /// μ is multiplied by this after every step.
    pub decay: f64,
    /// Stop once ‖∇‖₂ (over unfrozen coordinates) falls below this.
    pub grad_tol: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(method: Method, mu: f64, iters: usize) -> Self {
        TrainConfig {
            method,
            mu,
            iters,
            ridge: None,
            freeze: Freeze::None,
            gradient: GradientSource::Exact,
            decay: 1.0,
            grad_tol: DEFAULT_GRAD_TOL,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return contract(format!("learning rate must be positive, got {}", self.mu));
        }
        if self.iters == 0 {
            return contract("iters must be at least 1");
        }
        if let Some(r) = self.ridge {
            if !(r >= 0.0 && r.is_finite()) {
                return contract(format!("ridge must be nonnegative, got {r}"));
            }
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return contract(format!("decay must lie in (0, 1], got {}", self.decay));
        }
        if self.grad_tol < 0.0 {
            return contract("grad_tol must be nonnegative");
        }
        Ok(())
    }
}

/// Flat indices of the coordinates that move.
pub fn active_indices(freeze: Freeze, j: usize, k: usize) -> Vec<usize> {
    match freeze {
        Freeze::None => (0..j + k).collect(),
        Freeze::Theta => (j..j + k).collect(),
        Freeze::Phi => (0..j).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub objective: f64,
    /// Gradient over all coordinates.
    pub gradient: GradVector,
    /// ‖∇‖₂ over the unfrozen coordinates.
    pub grad_norm: f64,
    /// Update direction d over all coordinates (zero where frozen); γ ← γ − μd.
    pub direction: Vec<f64>,
    pub cond: Option<f64>,
    pub ridge: Option<f64>,
}

/// Solves (M + λ1) d = g by eigendecomposition; returns d and the condition number.
pub fn regularized_solve(m: &RMat, g: &[f64], ridge: Option<f64>) -> Result<(Vec<f64>, f64, f64)> {
    let n = m.nrows();
    let lambda = ridge.unwrap_or_else(|| DEFAULT_RIDGE_FACTOR * m.trace() / n.max(1) as f64);
    let reg = m + RMat::identity(n, n) * lambda;
    let eig = nalgebra::SymmetricEigen::new(reg);
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    if cond.is_nan() || cond > MAX_CONDITION {
        return Err(Error::SingularMetric { cond, ridge: lambda });
    }
    let gv = nalgebra::DVector::from_column_slice(g);
    let coeffs = eig.eigenvectors.transpose() * gv;
    let scaled = coeffs.component_div(&eig.eigenvalues);
    let d = &eig.eigenvectors * scaled;
    Ok((d.iter().copied().collect(), cond, lambda))
}

/// Gradient, objective and update direction at `state`.
pub fn direction(state: &EqbmState, task: &Task, cfg: &TrainConfig, iteration: usize) -> Result<StepInfo> {
    let (j, k) = (state.j(), state.k());
    let objective = task.objective(state)?;
    if !objective.is_finite() {
        return Err(Error::Domain(format!("objective is {objective}")));
    }
    let gradient = match cfg.gradient {
        GradientSource::Exact => task.exact_gradient(state, None)?,
        GradientSource::Shots(plan) => {
            task.shot_gradient(state, &plan.with_seed(term_seed(plan.seed ^ cfg.seed, 0x7124, iteration as u64)))?
        }
    };
    let full = gradient.to_vec();
    let active = active_indices(cfg.freeze, j, k);
    let g: Vec<f64> = active.iter().map(|&a| full[a]).collect();
    let grad_norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (d_active, cond, ridge) = match cfg.method {
        Method::Gd => (g.clone(), None, None),
        Method::Ngd(Metric::Identity) => {
            let (d, c, r) = regularized_solve(&RMat::identity(g.len(), g.len()), &g, Some(0.0))?;
            (d, Some(c), Some(r))
        }
        Method::Ngd(Metric::Info(kind)) => {
            let m = info_matrix(state, kind)?.restrict(&active);
            let (d, c, r) = regularized_solve(&m, &g, cfg.ridge)?;
            (d, Some(c), Some(r))
        }
    };
    let mut direction = vec![0.0; j + k];
    for (&a, d) in active.iter().zip(d_active) {
        direction[a] = d;
    }
    Ok(StepInfo { objective, gradient, grad_norm, direction, cond, ridge })
}

/// One update γ ← γ − μ d. Returns the new (θ, φ) and the diagnostics at the old point.
pub fn step(state: &EqbmState, task: &Task, cfg: &TrainConfig, mu: f64) -> Result<(Vec<f64>, Vec<f64>, StepInfo)> {
    let info = direction(state, task, cfg, 0)?;
    let (theta, phi) = apply(state, &info.direction, mu);
    Ok((theta, phi, info))
}

fn apply(state: &EqbmState, d: &[f64], mu: f64) -> (Vec<f64>, Vec<f64>) {
    let j = state.j();
    let theta = state.theta().iter().zip(&d[..j]).map(|(x, d)| x - mu * d).collect();
    let phi = state.phi().iter().zip(&d[j..]).map(|(x, d)| x - mu * d).collect();
    (theta, phi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub cond: Option<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Iterations,
    GradientTolerance,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Iterations => "iterations",
            StopReason::GradientTolerance => "gradient-tolerance",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    /// Row m holds γ_m and the objective and gradient there; the last row is
    /// the final point.
    pub rows: Vec<TraceRow>,
    pub stop: StopReason,
    pub j: usize,
    pub k: usize,
}

impl TrainTrace {
    pub fn final_row(&self) -> &TraceRow {
        self.rows.last().expect("trace has at least one row")
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.objective).collect()
    }

    /// True when no objective rises by more than `slack` from one row to the next.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].objective <= w[0].objective + slack)
    }

    pub fn csv_header(&self, with_time: bool) -> Vec<String> {
        let mut h: Vec<String> = ["iteration", "objective", "grad_norm", "cond"].iter().map(|s| s.to_string()).collect();
        h.extend((0..self.j).map(|i| format!("theta_{i}")));
        h.extend((0..self.k).map(|i| format!("phi_{i}")));
        if with_time {
            h.push("time".into());
        }
        h
    }

    /// CSV fields of each row, floats in shortest round-trip form.
    pub fn csv_records(&self, with_time: bool) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut v = vec![
                    r.iteration.to_string(),
                    format!("{:e}", r.objective),
                    format!("{:e}", r.grad_norm),
                    r.cond.map_or(String::new(), |c| format!("{c:e}")),
                ];
                v.extend(r.theta.iter().chain(&r.phi).map(|x| format!("{x:e}")));
                if with_time {
                    v.push(format!("{:e}", r.wall_time));
                }
                v
            })
            .collect()
    }
}

/// Runs `cfg.iters` updates from (θ₀, φ₀).
pub fn train(model: &Arc<DenseModel>, theta0: &[f64], phi0: &[f64], task: &Task, cfg: &TrainConfig) -> Result<TrainTrace> {
    cfg.validate()?;
    task.check(model)?;
    let mut state = resolve(model, theta0, phi0)?;
    let mut rows = Vec::with_capacity(cfg.iters + 1);
    let mut mu = cfg.mu;
    let mut stop = StopReason::Iterations;
    for it in 0..cfg.iters {
        let start = Instant::now();
        let info = direction(&state, task, cfg, it)?;
        let row = |wall_time| TraceRow {
            iteration: it,
            objective: info.objective,
            grad_norm: info.grad_norm,
            cond: info.cond,
            theta: state.theta().to_vec(),
            phi: state.phi().to_vec(),
            wall_time,
        };
        if info.grad_norm < cfg.grad_tol {
            rows.push(row(start.elapsed().as_secs_f64()));
            stop = StopReason::GradientTolerance;
            return Ok(TrainTrace { rows, stop, j: state.j(), k: state.k() });
        }
        let (theta, phi) = apply(&state, &info.direction, mu);
        let next = resolve(model, &theta, &phi)?;
        rows.push(row(start.elapsed().as_secs_f64()));
        state = next;
        mu *= cfg.decay;
    }
    let start = Instant::now();
    let objective = task.objective(&state)?;
    let grad = match cfg.gradient {
        GradientSource::Exact => task.exact_gradient(&state, None)?.to_vec(),
        GradientSource::Shots(_) => direction(&state, task, cfg, cfg.iters)?.gradient.to_vec(),
    };
    let active = active_indices(cfg.freeze, state.j(), state.k());
    rows.push(TraceRow {
        iteration: cfg.iters,
        objective,
        grad_norm: active.iter().map(|&a| grad[a] * grad[a]).sum::<f64>().sqrt(),
        cond: None,
        theta: state.theta().to_vec(),
        phi: state.phi().to_vec(),
        wall_time: start.elapsed().as_secs_f64(),
    });
    Ok(TrainTrace { rows, stop, j: state.j(), k: state.k() })
}

/// Largest μ = μ₀/2^m (m ≤ 20) whose run is monotone up to 1e−9; returns it with the run.
pub fn probe_learning_rate(
    model: &Arc<DenseModel>,
    theta0: &[f64],
    phi0: &[f64],
    task: &Task,
    cfg: &TrainConfig,
) -> Result<(f64, TrainTrace)> {
    let mut c = *cfg;
    for _ in 0..=MAX_HALVINGS {
        let trace = train(model, theta0, phi0, task, &c)?;
        if trace.is_monotone(MONOTONE_SLACK) {
            return Ok((c.mu, trace));
        }
        c.mu *= 0.5;
    }
    Err(Error::Domain(format!("no monotone learning rate found down to {:e}", c.mu * 2.0)))
}
