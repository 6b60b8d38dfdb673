//! The `mismatch` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use config::{GlobalArgs, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mismatch", version, about = "Upper bounds for mismatched decoding over discrete memoryless channels")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CapacityVariant {
    Psd,
    Sym,
    Tilde,
    TildeSym,
    Wq,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExponentVariant {
    Psd,
    Sym,
    Tilde,
    TildeSym,
    KspF,
    ClassicalSp,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetArg {
    Psd,
    Tilde,
    Sym,
    TildeSym,
    Wq,
    Gamma,
    ThetaStar,
    Mmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Certified,
    Exploratory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimModeArg {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecoderArg {
    Plain,
    Genie,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upper bound on the mismatch capacity.
    Bound {
        #[arg(value_enum)]
        variant: CapacityVariant,
        /// DMC file `{"rows": [[...]]}`.
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        metric: PathBuf,
        /// Two-output channel whose membership certifies the bound.
        #[arg(long)]
        candidate: Option<PathBuf>,
        /// Size of the auxiliary output alphabet searched in exploratory mode.
        #[arg(long)]
        zsize: Option<usize>,
        /// Defaults to certified with a candidate and exploratory without.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Z-side metric for the gamma variant.
        #[arg(long)]
        rho: Option<PathBuf>,
    },
    /// Test a two-output channel against one of the channel sets.
    Membership {
        #[arg(value_enum)]
        set: SetArg,
        #[arg(long)]
        metric: PathBuf,
        #[arg(long, conflicts_with = "copy_of", required_unless_present = "copy_of")]
        candidate: Option<PathBuf>,
        /// Use the channel that copies Y into Z for this DMC.
        #[arg(long)]
        copy_of: Option<PathBuf>,
        /// Input distribution, comma separated.
        #[arg(long)]
        px: Option<String>,
        #[arg(long)]
        rho: Option<PathBuf>,
    },
    /// Upper bound on the reliability function at a fixed composition and rate.
    Exponent {
        #[arg(value_enum)]
        variant: ExponentVariant,
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        metric: PathBuf,
        /// Input composition, comma separated.
        #[arg(long)]
        px: String,
        /// Rate, in the configured units.
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        zsize: Option<usize>,
        #[arg(long)]
        rho: Option<PathBuf>,
        /// Extra starting channel for the search.
        #[arg(long)]
        candidate: Option<PathBuf>,
    },
    /// Error probability of metric decoding, with or without the genie's list.
    Simulate {
        /// Two-output channel file.
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        metric: PathBuf,
        /// Codebook file `{"n": .., "codewords": [[..]]}`; otherwise a random constant-composition code.
        #[arg(long)]
        codebook: Option<PathBuf>,
        /// Blocklength of the random code.
        #[arg(long)]
        n: Option<usize>,
        /// Number of messages of the random code.
        #[arg(long, default_value_t = 4)]
        messages: usize,
        /// Target composition of the random code, comma separated; uniform by default.
        #[arg(long)]
        px: Option<String>,
        #[arg(long, value_enum, default_value = "plain")]
        decoder: DecoderArg,
        #[arg(long, value_enum, default_value = "exact")]
        mode: SimModeArg,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        /// Mix P(z|x,y) with the uniform distribution using weight 1/n.
        #[arg(long)]
        smooth: bool,
    },
    /// Superiority in both directions between (W, q) and (target, rho).
    Isomorphism {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        metric: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        rho: PathBuf,
    },
    /// Finite-blocklength slack terms.
    Slack {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        x: usize,
        #[arg(long)]
        y: usize,
        #[arg(long)]
        z: usize,
        #[arg(long)]
        wmin: f64,
    },
    /// Re-check the witness embedded in a bound or exponent report.
    Verify {
        report: PathBuf,
    },
}

/// Parse, run, print; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let cfg = RunConfig::resolve(&cli.global)?;
    cfg.install_pool();
    let outcome = commands::dispatch(&cli.command, &cfg)?;
    let text = io::render(&outcome, &cfg)?;
    io::emit(&text, &cfg)?;
    eprintln!("{}", outcome.message);
    Ok(outcome.exit)
}
