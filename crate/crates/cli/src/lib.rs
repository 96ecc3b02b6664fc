//! Experiment runner: configs in, CSV rows and JSON sidecars out.

pub mod config;
pub mod output;
pub mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use config::{ExperimentConfig, TABLE1, TABLE2};
use run::{prepare, CliError, Flags, VerifyLevel};

pub use run::Artifacts;

#[derive(Debug, Parser)]
#[command(name = "ruinsim", version, about = "Importance sampling for heavy-tailed ruin probabilities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Override the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub shards: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, env = "RUINSIM_OUT_DIR", default_value = "results")]
    pub out: PathBuf,

    /// Run the Lyapunov (and drift) verifiers; `strict` exits 3 on failure.
    #[arg(long, global = true, value_enum, default_value_t = VerifyLevel::Report)]
    pub verify: VerifyLevel,

    /// Record wall-clock seconds (makes outputs run-dependent).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate u(b) for every barrier in the config.
    Estimate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Lyapunov and drift inequality reports on an s-grid.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Conditional-law diagnostics and the coupling experiment.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a bundled table configuration.
    Reproduce {
        table: Table,
        /// Replications per barrier, replacing the bundled value.
        #[arg(long)]
        n: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Table {
    Table1,
    Table2,
}

impl Cli {
    fn flags(&self) -> Flags {
        Flags { seed: self.seed, shards: self.shards, out: self.out.clone(), verify: self.verify, timing: self.timing }
    }
}

pub fn execute(cli: &Cli) -> Result<Artifacts, CliError> {
    let flags = cli.flags();
    match &cli.command {
        Command::Estimate { config } => run::run_estimate(&prepare(run::load_config(config)?, &flags)?, &flags, "estimate"),
        Command::Verify { config } => run::run_verify(&prepare(run::load_config(config)?, &flags)?, &flags),
        Command::Diagnose { config } => run::run_diagnose(&prepare(run::load_config(config)?, &flags)?, &flags),
        Command::Reproduce { table, n } => {
            let text = match table {
                Table::Table1 => TABLE1,
                Table::Table2 => TABLE2,
            };
            let mut c = ExperimentConfig::from_toml(text).map_err(CliError::Config)?;
            if let Some(n) = n {
                c.n = *n;
            }
            run::run_estimate(&prepare(c, &flags)?, &flags, "reproduce")
        }
    }
}

/// Parse `args` (including the program name) and run.
pub fn run_from<I, T>(args: I) -> Result<Artifacts, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Config(e.into()))?;
    execute(&cli)
}
