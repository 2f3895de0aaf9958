//! Experiment harness behind the `radon-lab` binary.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

use std::path::{Path, PathBuf};

use config::{ExperimentConfig, ExperimentKind};
use error::CliError;
use report::{write_report, Report, RunContext};

/// Everything a run needs besides the experiment code.
#[derive(Clone, Debug)]
pub struct RunRequest {
    pub kind: ExperimentKind,
    /// Raw config text; empty means all defaults.
    pub config_text: String,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    /// `0` when every check passed, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.passed() {
            0
        } else {
            1
        }
    }
}

/// Parses the config, applies the overrides and runs the experiment
/// without writing anything.
pub fn evaluate(kind: ExperimentKind, config_text: &str, seed: Option<u64>) -> Result<(ExperimentConfig, Report), CliError> {
    let mut cfg = if config_text.trim().is_empty() { ExperimentConfig::default() } else { ExperimentConfig::from_json(config_text)? };
    if let Some(declared) = cfg.experiment {
        if declared != kind {
            return Err(CliError::config("cli", format!("config is for `{declared}`, not `{kind}`")));
        }
    }
    if seed.is_some() {
        cfg.seed = seed;
    }
    let report = experiments::run(kind, &cfg)?;
    Ok((cfg, report))
}

/// Runs the experiment on a dedicated pool and writes the report.
pub fn execute(req: &RunRequest) -> Result<RunOutcome, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = req.threads {
        if n == 0 {
            return Err(CliError::config("cli", "--threads must be positive"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::config("cli", format!("thread pool: {e}")))?;
    let (cfg, report) = pool.install(|| evaluate(req.kind, &req.config_text, req.seed))?;
    let out_dir = match (&req.out, &cfg.out_dir) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => Path::new("out").join(req.kind.name()),
    };
    let ctx = RunContext {
        experiment: req.kind.name().to_string(),
        config_bytes: req.config_text.as_bytes().to_vec(),
        seed: cfg.seed(),
        sampling_seed: cfg.sampling_seed(),
        threads: pool.current_num_threads(),
    };
    let files = write_report(&out_dir, &ctx, &report)?;
    Ok(RunOutcome { report, out_dir, files })
}
