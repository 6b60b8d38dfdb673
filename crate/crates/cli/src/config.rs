//! Run configuration: defaults, an optional `--config` file, then flags.

use std::path::PathBuf;

use clap::ValueEnum;
use mismatch_core::optim::SearchBudget;
use mismatch_core::Exec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "MISMATCH_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Bits,
    Nats,
}

impl Units {
    pub fn from_nats(self, v: f64) -> f64 {
        match self {
            Units::Bits => mismatch_core::prob::nats_to_bits(v),
            Units::Nats => v,
        }
    }

    pub fn to_nats(self, v: f64) -> f64 {
        match self {
            Units::Bits => mismatch_core::prob::bits_to_nats(v),
            Units::Nats => v,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Units::Bits => "bits",
            Units::Nats => "nats",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed gap between a stated and a re-evaluated objective in `verify`.
    pub revalidation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { revalidation: mismatch_core::bounds::REVALIDATION_TOL }
    }
}

/// Everything that determines a run's output; embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub restarts: usize,
    pub iterations: usize,
    /// Input-distribution mesh `1/k` for exploratory bounds; the built-in grid when absent.
    pub grid_mesh: Option<usize>,
    /// 0 lets the thread pool pick; 1 runs sequentially.
    pub workers: usize,
    pub units: Units,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub renormalize: bool,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        let b = SearchBudget::default();
        Self {
            seed: b.seed,
            restarts: b.restarts,
            iterations: b.iterations,
            grid_mesh: None,
            workers: 0,
            units: Units::Bits,
            format: Format::Json,
            output: None,
            renormalize: false,
            tolerances: Tolerances::default(),
        }
    }
}

/// Flag values that override the configuration file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct GlobalArgs {
    /// JSON file with a run configuration; flags given here override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub units: Option<Units>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Rescale input rows that do not sum to one instead of rejecting them.
    #[arg(long, global = true)]
    pub renormalize: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    #[arg(long, global = true)]
    pub grid_mesh: Option<usize>,
}

impl RunConfig {
    pub fn resolve(g: &GlobalArgs) -> Result<Self, CliError> {
        let mut c = match &g.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Input(format!("invalid config {}: {e}", p.display())))?
            }
            None => {
                let mut c = RunConfig::default();
                if let Ok(v) = std::env::var(WORKERS_ENV) {
                    c.workers = v
                        .parse()
                        .map_err(|_| CliError::Input(format!("{WORKERS_ENV} must be a worker count, got '{v}'")))?;
                }
                c
            }
        };
        if let Some(v) = g.workers {
            c.workers = v;
        }
        if let Some(v) = g.units {
            c.units = v;
        }
        if let Some(v) = &g.output {
            c.output = Some(v.clone());
        }
        if let Some(v) = g.format {
            c.format = v;
        }
        c.renormalize |= g.renormalize;
        if let Some(v) = g.seed {
            c.seed = v;
        }
        if let Some(v) = g.restarts {
            c.restarts = v;
        }
        if let Some(v) = g.iterations {
            c.iterations = v;
        }
        if let Some(v) = g.grid_mesh {
            c.grid_mesh = Some(v);
        }
        if c.restarts == 0 || c.iterations == 0 {
            return Err(CliError::Input("restarts and iterations must be positive".into()));
        }
        if c.grid_mesh == Some(0) {
            return Err(CliError::Input("grid_mesh must be positive".into()));
        }
        Ok(c)
    }

    pub fn budget(&self) -> SearchBudget {
        SearchBudget::new(self.restarts, self.iterations, self.seed)
    }

    pub fn exec(&self) -> Exec {
        if self.workers == 1 {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    /// Size the global thread pool. Results never depend on it.
    pub fn install_pool(&self) {
        #[cfg(feature = "parallel")]
        if self.workers > 1 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(self.workers).build_global();
        }
    }
}
