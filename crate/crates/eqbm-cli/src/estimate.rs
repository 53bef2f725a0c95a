use std::path::PathBuf;

use clap::{Args, ValueEnum};
use eqbm::estimators::{
    estimate_genmod_grad_phi, estimate_genmod_grad_theta, estimate_gsee_grad, estimate_info_entry, Budget, Estimate,
    ShotPlan,
};
use eqbm::gradients::{genmod_grad, gsee_grad, Param};
use eqbm::info::{info_matrix, Block, InfoKind};
use eqbm::state::EqbmState;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{emit, Provenance};
use crate::{StateArgs, TaskArgs};

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    GradGsee,
    GradGenmod,
    Fb,
    Wy,
    Km,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockArg {
    Tt,
    Pp,
    Tp,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamArg {
    Theta,
    Phi,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetArg {
    PerTerm,
    Split,
}

#[derive(Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    state: StateArgs,
    #[arg(long, value_enum)]
    kind: Kind,
    /// Matrix block for fb/wy/km; θφ entries are (θ index i, φ index j).
    #[arg(long, value_enum)]
    block: Option<BlockArg>,
    /// Parameter group for gradient kinds.
    #[arg(long, value_enum)]
    param: Option<ParamArg>,
    #[arg(long, default_value_t = 0)]
    i: usize,
    #[arg(long, default_value_t = 0)]
    j: usize,
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Fixed shots per term instead of the Hoeffding count for --eps.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = BudgetArg::PerTerm)]
    budget: BudgetArg,
    /// Disallow thermofield-double preparation.
    #[arg(long)]
    no_purification: bool,
    /// Repeat over this many consecutive seeds and report the failure rate.
    #[arg(long)]
    sweep: Option<u64>,
    /// Include wall-clock time (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Quantity {
    kind: Kind,
    #[serde(skip_serializing_if = "Option::is_none")]
    block: Option<BlockArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    param: Option<ParamArg>,
    i: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    j: Option<usize>,
}

#[derive(Serialize)]
struct PlanDoc {
    epsilon: f64,
    delta: f64,
    shots_per_term: u64,
    budget: BudgetArg,
    seed: u64,
    purification: bool,
}

#[derive(Serialize)]
struct TermDoc {
    label: String,
    scale: f64,
    n_used: u64,
    raw_mean: f64,
    estimate: f64,
    stderr: f64,
    epsilon: f64,
    delta: f64,
}

#[derive(Serialize)]
struct OutcomeDoc {
    estimate: f64,
    reference: f64,
    gap: f64,
    epsilon_bound: f64,
    delta_bound: f64,
    stderr: f64,
    shots: u64,
    pass: bool,
    terms: Vec<TermDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time: Option<f64>,
}

#[derive(Serialize)]
struct SweepDoc {
    runs: u64,
    failures: u64,
    failure_rate: f64,
    delta_bound: f64,
    threshold: f64,
    max_gap: f64,
    pass: bool,
}

#[derive(Serialize)]
struct EstimateDoc {
    provenance: Provenance,
    quantity: Quantity,
    theta: Vec<f64>,
    phi: Vec<f64>,
    plan: PlanDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    outcome: Option<OutcomeDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepDoc>,
}

fn info_kind(kind: Kind) -> Option<InfoKind> {
    match kind {
        Kind::Fb => Some(InfoKind::Fb),
        Kind::Wy => Some(InfoKind::Wy),
        Kind::Km => Some(InfoKind::Km),
        _ => None,
    }
}

fn outcome(e: &Estimate, reference: f64, timing: bool) -> OutcomeDoc {
    let gap = (e.estimate - reference).abs();
    OutcomeDoc {
        estimate: e.estimate,
        reference,
        gap,
        epsilon_bound: e.epsilon_bound,
        delta_bound: e.delta_bound,
        stderr: e.stderr,
        shots: e.shots,
        pass: gap <= e.epsilon_bound,
        terms: e
            .terms
            .iter()
            .map(|t| TermDoc {
                label: t.label.clone(),
                scale: t.scale,
                n_used: t.n_used,
                raw_mean: t.raw_mean,
                estimate: t.estimate,
                stderr: t.stderr,
                epsilon: t.epsilon,
                delta: t.delta,
            })
            .collect(),
        wall_time: timing.then_some(e.wall_time),
    }
}

pub fn run(a: &EstimateArgs) -> CliResult<()> {
    let (loaded, s) = a.state.load()?;
    let mut plan = match a.shots {
        Some(n) => ShotPlan::with_shots(n, a.delta, a.seed)?,
        None => ShotPlan::new(a.eps, a.delta, a.seed)?,
    };
    plan = plan.with_budget(match a.budget {
        BudgetArg::PerTerm => Budget::PerTerm,
        BudgetArg::Split => Budget::SplitEqual,
    });
    if a.no_purification {
        plan = plan.without_purification();
    }
    let (quantity, reference, estimator) = build(a, &s)?;
    let doc_plan = PlanDoc {
        epsilon: plan.epsilon,
        delta: plan.delta,
        shots_per_term: plan.shots,
        budget: a.budget,
        seed: a.seed,
        purification: plan.purification,
    };
    let (outcome_doc, sweep) = match a.sweep {
        None => (Some(outcome(&estimator(&plan)?, reference, a.timing)), None),
        Some(0) => return Err(CliError::usage("--sweep needs at least one run")),
        Some(runs) => {
            let mut failures = 0;
            let mut max_gap: f64 = 0.0;
            let mut delta_bound = 0.0;
            for r in 0..runs {
                let e = estimator(&plan.with_seed(a.seed.wrapping_add(r)))?;
                let gap = (e.estimate - reference).abs();
                max_gap = max_gap.max(gap);
                delta_bound = e.delta_bound;
                if gap > e.epsilon_bound {
                    failures += 1;
                }
            }
            let rate = failures as f64 / runs as f64;
            let threshold = delta_bound + 0.03;
            (
                None,
                Some(SweepDoc { runs, failures, failure_rate: rate, delta_bound, threshold, max_gap, pass: rate <= threshold }),
            )
        }
    };
    let doc = EstimateDoc {
        provenance: Provenance::new("estimate", Some(loaded.file.sha256())),
        quantity,
        theta: s.theta().to_vec(),
        phi: s.phi().to_vec(),
        plan: doc_plan,
        outcome: outcome_doc,
        sweep,
    };
    emit(&doc, a.out.as_deref())
}

type Estimator<'a> = Box<dyn Fn(&ShotPlan) -> CliResult<Estimate> + 'a>;

fn build<'a>(a: &'a EstimateArgs, s: &'a EqbmState) -> CliResult<(Quantity, f64, Estimator<'a>)> {
    let (i, j) = (a.i, a.j);
    if let Some(kind) = info_kind(a.kind) {
        let block = match a.block {
            Some(BlockArg::Tt) => Block::ThetaTheta,
            Some(BlockArg::Pp) => Block::PhiPhi,
            Some(BlockArg::Tp) => Block::ThetaPhi,
            None => return Err(CliError::usage("--block is required for information-matrix entries")),
        };
        let (r, c) = match block {
            Block::ThetaTheta => (i, j),
            Block::PhiPhi => (s.j() + i, s.j() + j),
            Block::ThetaPhi => (i, s.j() + j),
        };
        let m = info_matrix(s, kind)?;
        if r >= m.dim() || c >= m.dim() {
            return Err(CliError::usage(format!("entry ({i}, {j}) is outside the {block} block")));
        }
        let reference = m.matrix()[(r, c)];
        let q = Quantity { kind: a.kind, block: a.block, param: None, i, j: Some(j) };
        return Ok((q, reference, Box::new(move |p| Ok(estimate_info_entry(s, kind, block, i, j, p)?))));
    }
    let param = match a.param {
        Some(ParamArg::Theta) if i < s.j() => Param::Theta(i),
        Some(ParamArg::Phi) if i < s.k() => Param::Phi(i),
        Some(_) => return Err(CliError::usage(format!("parameter index {i} out of range"))),
        None => return Err(CliError::usage("--param is required for gradient entries")),
    };
    let q = Quantity { kind: a.kind, block: None, param: a.param, i, j: None };
    match a.kind {
        Kind::GradGsee => {
            let o = a.task.observable()?;
            let reference = gsee_grad(s, &o.dense())?.get(param);
            Ok((q, reference, Box::new(move |p| Ok(estimate_gsee_grad(s, &o, param, p)?))))
        }
        _ => {
            let t = a.task.target(s.dim())?;
            let reference = genmod_grad(s, &t)?.get(param);
            Ok((
                q,
                reference,
                Box::new(move |p| {
                    Ok(match param {
                        Param::Theta(j) => estimate_genmod_grad_theta(s, &t, j, p)?,
                        Param::Phi(k) => estimate_genmod_grad_phi(s, &t, k, p)?,
                    })
                }),
            ))
        }
    }
}
