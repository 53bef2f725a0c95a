use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eqbm::gradients::{genmod_grad, gsee_grad, gsee_value, relent_value, GradVector};
use eqbm::info::{info_matrix, InfoKind};
use eqbm::pauli::{random_model, PauliSum};
use eqbm::state::EqbmState;
use serde::Serialize;

mod error;
mod estimate;
mod model_file;
mod output;
mod plot;
mod train;
mod verify;

use error::{CliError, CliResult};
use model_file::{load_model, load_target, Loaded, ModelFile};
use output::{emit, rows, Provenance};

#[derive(Parser)]
#[command(name = "eqbm", version, about = "Exact evaluation, shot estimation and training of evolved quantum Boltzmann machines")]
struct Cli {
    /// Worker threads for shot and matrix-entry parallelism.
    #[arg(long, global = true, env = "EQBM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded random model document.
    GenModel {
        #[arg(long)]
        qubits: usize,
        #[arg(long)]
        j_terms: usize,
        #[arg(long)]
        k_terms: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial coefficients are drawn from [−scale, scale].
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact gradients, information matrices or objective values.
    Eval {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, value_enum)]
        what: What,
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Shot-based estimate of one gradient or information-matrix entry.
    Estimate(estimate::EstimateArgs),
    /// Run an invariant suite and report the largest deviations.
    Verify {
        #[arg(long, value_enum, default_value_t = verify::Suite::All)]
        suite: verify::Suite,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gradient or natural-gradient training from a config document.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args, Clone)]
pub struct StateArgs {
    /// Model document.
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated θ; defaults to the model's coefficients.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta: Option<Vec<f64>>,
    /// Comma-separated φ; defaults to the model's coefficients.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub phi: Option<Vec<f64>>,
}

impl StateArgs {
    pub fn load(&self) -> CliResult<(Loaded, EqbmState)> {
        let loaded = load_model(&self.model)?;
        let state = loaded.state(self.theta.as_deref(), self.phi.as_deref())?;
        Ok((loaded, state))
    }
}

#[derive(Args, Clone)]
pub struct TaskArgs {
    /// Pauli-sum observable, e.g. "0.5*ZZ + -1*XI".
    #[arg(long, allow_hyphen_values = true)]
    pub obs: Option<String>,
    /// Model document whose state is the generative-modelling target.
    #[arg(long)]
    pub target: Option<PathBuf>,
}

impl TaskArgs {
    pub fn observable(&self) -> CliResult<PauliSum> {
        match &self.obs {
            Some(s) => Ok(PauliSum::parse(s)?),
            None => Err(CliError::usage("--obs is required")),
        }
    }

    pub fn target(&self, dim: usize) -> CliResult<eqbm::gradients::GenModTarget> {
        match &self.target {
            Some(p) => load_target(p, dim),
            None => Err(CliError::usage("--target is required")),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum What {
    GradGsee,
    GradGenmod,
    Fb,
    Wy,
    Km,
    Objective,
}

#[derive(Serialize)]
#[serde(untagged)]
enum EvalResult {
    Gradient { theta: Vec<f64>, phi: Vec<f64> },
    Matrix { kind: String, j: usize, k: usize, matrix: Vec<Vec<f64>> },
    Objective { task: &'static str, value: f64 },
}

#[derive(Serialize)]
struct EvalDoc {
    provenance: Provenance,
    what: String,
    theta: Vec<f64>,
    phi: Vec<f64>,
    result: EvalResult,
}

fn grad_result(g: GradVector) -> EvalResult {
    EvalResult::Gradient { theta: g.theta, phi: g.phi }
}

fn eval(state_args: &StateArgs, what: What, task: &TaskArgs, out: Option<&std::path::Path>) -> CliResult<()> {
    let (loaded, s) = state_args.load()?;
    let result = match what {
        What::GradGsee => grad_result(gsee_grad(&s, &task.observable()?.dense())?),
        What::GradGenmod => grad_result(genmod_grad(&s, &task.target(s.dim())?)?),
        What::Fb | What::Wy | What::Km => {
            let kind = match what {
                What::Fb => InfoKind::Fb,
                What::Wy => InfoKind::Wy,
                _ => InfoKind::Km,
            };
            let m = info_matrix(&s, kind)?;
            EvalResult::Matrix { kind: kind.to_string(), j: s.j(), k: s.k(), matrix: rows(m.matrix()) }
        }
        What::Objective => match (&task.obs, &task.target) {
            (Some(_), None) => EvalResult::Objective { task: "gsee", value: gsee_value(&s, &task.observable()?.dense())? },
            (None, Some(_)) => EvalResult::Objective { task: "genmod", value: relent_value(&s, &task.target(s.dim())?)? },
            _ => return Err(CliError::usage("objective needs exactly one of --obs and --target")),
        },
    };
    let doc = EvalDoc {
        provenance: Provenance::new("eval", Some(loaded.file.sha256())),
        what: what.to_possible_value().expect("no skipped variants").get_name().to_string(),
        theta: s.theta().to_vec(),
        phi: s.phi().to_vec(),
        result,
    };
    emit(&doc, out)
}

fn gen_model(qubits: usize, j: usize, k: usize, seed: u64, scale: f64, out: Option<&std::path::Path>) -> CliResult<()> {
    let m = random_model(qubits, j, k, scale, seed)?;
    let mut file = ModelFile::from_model(&m, Some(seed));
    let mut prov = serde_json::to_value(Provenance::new("gen-model", None))?;
    prov["model_sha256"] = serde_json::Value::String(file.sha256());
    file.provenance = Some(prov);
    emit(&file, out)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::GenModel { qubits, j_terms, k_terms, seed, scale, out } => {
            gen_model(qubits, j_terms, k_terms, seed, scale, out.as_deref())
        }
        Command::Eval { state, what, task, out } => eval(&state, what, &task, out.as_deref()),
        Command::Estimate(args) => estimate::run(&args),
        Command::Verify { suite, seeds, out } => verify::run(suite, seeds, out.as_deref()),
        Command::Train { config, out_dir } => train::run(&config, &out_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eqbm: {e}");
            e.exit_code()
        }
    }
}
