//! Command-line front end.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | I/O error (unreadable scenario, unwritable output) |
//! | 2 | usage or schema error |
//! | 3 | infeasible: some QoS targets cannot be met, or no user fits the budget |
//! | 4 | queue validation failed for at least one user |
//! | 5 | numerical failure inside a solver |

pub mod commands;
pub mod report;
pub mod scenario;

use crate::allocator::Policy;
use crate::exec::Execution;
use clap::{Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub use commands::Status;
pub use scenario::ScenarioFile;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Library(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use crate::Error as E;
        match self {
            CliError::Io { .. } => 1,
            CliError::Schema(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Library(e) => match e {
                E::InvalidArgument(_) | E::Domain(_) | E::InconsistentAllocation(_) => 2,
                E::QosInfeasible(_)
                | E::DegenerateChannel
                | E::AllocationInfeasible { .. }
                | E::BelowMinimumRate { .. }
                | E::ExponentCap { .. } => 3,
                _ => 5,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Sum,
    Fair,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Sum => Policy::SumQuality,
            PolicyArg::Fair => Policy::Fairness,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vidqos", version, about = "Delay-constrained video bandwidth allocation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario file (TOML, or JSON by extension).
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = PolicyArg::Sum)]
    pub policy: PolicyArg,
    /// Master seed for cell drops and queue simulations.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `output.dir` in the scenario.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Dump per-block queue traces during `validate`.
    #[arg(long, global = true)]
    pub trace: bool,
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Solve the QoS constants of every user.
    Qos,
    /// Schedule and allocate the listed users.
    Allocate,
    /// Decide whether one more user can be admitted.
    Admit {
        /// File holding the newcomer as a single user table; overrides
        /// `admit.new_user`.
        #[arg(long)]
        new_user: Option<PathBuf>,
        /// Directory with an `allocate` export to admit against, instead of
        /// solving the allocation afresh.
        #[arg(long)]
        allocation: Option<PathBuf>,
    },
    /// Write the configured figure-data grids.
    Sweep,
    /// Allocate, then check every user's delay target by queue simulation.
    Validate,
}

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct Options {
    pub policy: Policy,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub trace: bool,
    pub exec: Execution,
}

const DEFAULT_OUT_DIR: &str = "vidqos-out";

/// Parses `args`, runs the command and returns the process exit code.
/// Reports go to `stdout`, diagnostics to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(status) => {
            if let Some(msg) = status.message() {
                let _ = writeln!(stderr, "{msg}");
            }
            status.exit_code()
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<Status, CliError> {
    let path = cli.scenario.as_ref().ok_or_else(|| CliError::Schema("--scenario <path> is required".into()))?;
    let file = ScenarioFile::load(path)?;
    let opts = Options {
        policy: cli.policy.into(),
        seed: cli.seed,
        out_dir: cli.out.clone().or_else(|| file.output.dir.clone()).unwrap_or_else(|| DEFAULT_OUT_DIR.into()),
        trace: cli.trace,
        exec: if cli.sequential { Execution::Sequential } else { Execution::Parallel },
    };
    match &cli.command {
        Command::Qos => commands::cmd_qos(&file, &opts, stdout),
        Command::Allocate => commands::cmd_allocate(&file, &opts, stdout),
        Command::Admit { new_user, allocation } => {
            commands::cmd_admit(&file, &opts, new_user.as_deref(), allocation.as_deref(), stdout)
        }
        Command::Sweep => commands::cmd_sweep(&file, &opts, stdout),
        Command::Validate => commands::cmd_validate(&file, &opts, stdout),
    }
}
