//! `eqbm train`: config document in, trace CSV and summary out.

use std::path::{Path, PathBuf};

use eqbm::estimators::ShotPlan;
use eqbm::gradients::GenModTarget;
use eqbm::pauli::PauliSum;
use eqbm::trainer::{probe_learning_rate, train, Freeze, GradientSource, Method, Task, TrainConfig, TrainTrace};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::model_file::{load_model, load_target, read_json};
use crate::output::{emit, write_file, Provenance};
use crate::plot::objective_svg;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TaskFile {
    Gsee {
        observable: String,
    },
    /// Target is ω of `model` (or of the training model when absent) at
    /// `theta`/`phi` (defaulting to that model's coefficients).
    Genmod {
        #[serde(default)]
        model: Option<PathBuf>,
        #[serde(default)]
        theta: Option<Vec<f64>>,
        #[serde(default)]
        phi: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum GradientFile {
    #[default]
    Exact,
    Shots {
        epsilon: f64,
        delta: f64,
        #[serde(default)]
        shots: Option<u64>,
    },
}

fn default_freeze() -> String {
    "none".into()
}

fn default_decay() -> f64 {
    1.0
}

fn default_grad_tol() -> f64 {
    eqbm::trainer::DEFAULT_GRAD_TOL
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    /// Relative paths are resolved against the config file's directory.
    pub model: PathBuf,
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    #[serde(default)]
    pub phi0: Option<Vec<f64>>,
    pub task: TaskFile,
    pub method: String,
    pub mu: f64,
    pub iters: usize,
    #[serde(default)]
    pub ridge: Option<f64>,
    #[serde(default = "default_freeze")]
    pub freeze: String,
    #[serde(default)]
    pub gradient: GradientFile,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    /// Halve μ until the run is monotone.
    #[serde(default)]
    pub probe: bool,
    #[serde(default)]
    pub plot: bool,
    /// Add a per-step wall-time column to the CSV.
    #[serde(default)]
    pub csv_time: bool,
}

#[derive(Serialize)]
struct Summary {
    provenance: Provenance,
    config_sha256: String,
    config: TrainFile,
    stop: String,
    iterations: usize,
    mu: f64,
    initial_objective: f64,
    final_objective: f64,
    final_grad_norm: f64,
    monotone: bool,
    theta: Vec<f64>,
    phi: Vec<f64>,
    files: Vec<String>,
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn run(config: &Path, out_dir: &Path) -> CliResult<()> {
    let bytes = std::fs::read(config).map_err(|e| CliError::Io(format!("{}: {e}", config.display())))?;
    let cfg_file: TrainFile = read_json(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let loaded = load_model(&resolve_path(base, &cfg_file.model))?;
    let dm = loaded.dense.clone();
    let theta0 = cfg_file.theta0.clone().unwrap_or_else(|| dm.model.theta.clone());
    let phi0 = cfg_file.phi0.clone().unwrap_or_else(|| dm.model.phi.clone());

    let task = match &cfg_file.task {
        TaskFile::Gsee { observable } => Task::Gsee(PauliSum::parse(observable)?),
        TaskFile::Genmod { model: None, theta, phi } => {
            let s = loaded.state(theta.as_deref(), phi.as_deref())?;
            Task::GenMod(GenModTarget::new(s.omega().clone())?)
        }
        TaskFile::Genmod { model: Some(p), theta: None, phi: None } => Task::GenMod(load_target(&resolve_path(base, p), dm.dim())?),
        TaskFile::Genmod { model: Some(p), theta, phi } => {
            let t = load_model(&resolve_path(base, p))?;
            if t.dense.dim() != dm.dim() {
                return Err(CliError::usage("target model acts on a different number of qubits"));
            }
            Task::GenMod(GenModTarget::new(t.state(theta.as_deref(), phi.as_deref())?.omega().clone())?)
        }
    };
    let method: Method = cfg_file.method.parse()?;
    let freeze: Freeze = cfg_file.freeze.parse()?;
    let gradient = match &cfg_file.gradient {
        GradientFile::Exact => GradientSource::Exact,
        GradientFile::Shots { epsilon, delta, shots } => GradientSource::Shots(match shots {
            Some(n) => ShotPlan::with_shots(*n, *delta, cfg_file.seed)?,
            None => ShotPlan::new(*epsilon, *delta, cfg_file.seed)?,
        }),
    };
    let cfg = TrainConfig {
        method,
        mu: cfg_file.mu,
        iters: cfg_file.iters,
        ridge: cfg_file.ridge,
        freeze,
        gradient,
        decay: cfg_file.decay,
        grad_tol: cfg_file.grad_tol,
        seed: cfg_file.seed,
    };
    let (mu, trace) = if cfg_file.probe {
        probe_learning_rate(&dm, &theta0, &phi0, &task, &cfg)?
    } else {
        (cfg.mu, train(&dm, &theta0, &phi0, &task, &cfg)?)
    };

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let mut files = vec!["trace.csv".to_string(), "summary.json".to_string()];
    write_csv(&trace, &out_dir.join("trace.csv"), cfg_file.csv_time)?;
    if cfg_file.plot {
        write_file(&out_dir.join("objective.svg"), objective_svg(&trace.objectives()).as_bytes())?;
        files.push("objective.svg".into());
    }
    let last = trace.final_row();
    let summary = Summary {
        provenance: Provenance::new("train", Some(loaded.file.sha256())),
        config_sha256: format!("{:x}", Sha256::digest(&bytes)),
        stop: trace.stop.to_string(),
        iterations: trace.rows.len() - 1,
        mu,
        initial_objective: trace.rows[0].objective,
        final_objective: last.objective,
        final_grad_norm: last.grad_norm,
        monotone: trace.is_monotone(eqbm::trainer::MONOTONE_SLACK),
        theta: last.theta.clone(),
        phi: last.phi.clone(),
        files,
        config: cfg_file,
    };
    emit(&summary, Some(&out_dir.join("summary.json")))
}

fn write_csv(trace: &TrainTrace, path: &Path, with_time: bool) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    w.write_record(trace.csv_header(with_time))?;
    for r in trace.csv_records(with_time) {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
