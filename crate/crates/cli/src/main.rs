//! `vhsim`: experiment workflows over the simulator.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;
use vhsim_core::content::{ContentError, Effort, PolicyCategory};
use vhsim_core::engine::config::Backend;
use vhsim_core::engine::{ConfigError, EngineError};
use vhsim_core::eval::EvalError;
use vhsim_core::socialnet::SocialNetError;

#[derive(Parser, Debug)]
#[command(name = "vhsim", version, about = "Multi-agent vaccine-hesitancy simulator")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Config file (TOML); defaults apply when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed; for `run`, also the single run seed unless --seeds is given.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendArg {
    Scripted,
    Http,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Scripted => Backend::Scripted,
            BackendArg::Http => Backend::Http,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum CategoryArg {
    Incentive,
    Ambassador,
    Mandate,
}

impl From<CategoryArg> for PolicyCategory {
    fn from(c: CategoryArg) -> Self {
        match c {
            CategoryArg::Incentive => PolicyCategory::Incentive,
            CategoryArg::Ambassador => PolicyCategory::Ambassador,
            CategoryArg::Mandate => PolicyCategory::Mandate,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffortArg {
    Weak,
    Strong,
}

impl From<EffortArg> for Effort {
    fn from(e: EffortArg) -> Self {
        match e {
            EffortArg::Weak => Effort::Weak,
            EffortArg::Strong => Effort::Strong,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Scaffold a config, marginals, policy catalog, risk series and few-shot news.
    Init {
        dir: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Sample personas and ask the model who follows whom.
    GenNetwork {
        /// Edge-list path; `<out>/network/edges.txt` by default.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a balanced news corpus.
    GenNews {
        #[arg(long)]
        per_stance: Option<usize>,
        /// Corpus path; `<out>/news/corpus.jsonl` by default.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run one batch of simulations.
    Run {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_enum, requires = "effort")]
        policy: Option<CategoryArg>,
        #[arg(long, value_enum, requires = "policy")]
        effort: Option<EffortArg>,
    },
    /// Evaluation protocols.
    Eval {
        #[command(subcommand)]
        protocol: EvalCommand,
    },
    /// Kendall tau-b of each ranking column against a reference column.
    RankCompare {
        /// `policy,<name>...` CSV; the bundled table when absent.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value = "Expert")]
        reference: String,
        /// Add a Borda aggregate of every non-reference column.
        #[arg(long)]
        borda: bool,
    },
    /// Metrics CSVs and an LLM-written analysis over saved run logs.
    Report {
        /// Directory of `.jsonl` run logs; `<out>/logs` by default.
        #[arg(long)]
        logs: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "meta")]
        scope: ScopeArg,
        /// Agents sampled per run for the analysis; 0 skips it.
        #[arg(long, default_value_t = 25)]
        agents: usize,
        /// `week,hesitancy_percent` CSV to compare trajectories against.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Overrides {
    /// Comma-separated run seeds; overrides the config's seed list.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Policy catalog (JSONL).
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub mix: Option<f64>,
    #[arg(long)]
    pub agents: Option<usize>,
    #[arg(long)]
    pub steps: Option<u32>,
    #[arg(long)]
    pub warmup: Option<u32>,
    #[arg(long)]
    pub temperature: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScopeArg {
    PerAgent,
    Meta,
}

#[derive(Subcommand, Debug)]
pub enum EvalCommand {
    /// Temperature search against the target warmup hesitancy.
    P1 {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated temperature grid.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = vhsim_core::eval::P1_TARGET)]
        target: f64,
    },
    /// Weak versus strong effort of one policy category.
    P2 {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long = "policy", value_enum)]
        category: CategoryArg,
    },
    /// All-negative versus all-positive news drift.
    P3 {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// LLM-as-judge ratings of logged episodes.
    P4 {
        /// Directory of `.jsonl` run logs; `<out>/logs` by default.
        #[arg(long)]
        logs: Option<PathBuf>,
        #[arg(long, default_value_t = vhsim_core::eval::judge::DEFAULT_JUDGE_AGENTS)]
        agents: usize,
        #[arg(long, default_value_t = vhsim_core::eval::judge::DEFAULT_EPISODES)]
        episodes: usize,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Provider(String),
    #[error("{0}")]
    Protocol(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Provider(_) => 3,
            CliError::Protocol(_) => 4,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Other(format!("{}: {e}", path.display()))
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ContentError> for CliError {
    fn from(e: ContentError) -> Self {
        match e {
            ContentError::Generation { .. } => CliError::Provider(e.to_string()),
            ContentError::Io { .. } => CliError::Other(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<SocialNetError> for CliError {
    fn from(e: SocialNetError) -> Self {
        match e {
            SocialNetError::Provider { .. } => CliError::Provider(e.to_string()),
            SocialNetError::Io { .. } => CliError::Other(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Content(c) => c.into(),
            EngineError::SocialNet(s) => s.into(),
            EngineError::Embed(_) => CliError::Provider(e.to_string()),
            EngineError::NoSteps => CliError::Protocol(e.to_string()),
            EngineError::Io { .. } | EngineError::Log(_) | EngineError::LogParse { .. } => CliError::Other(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Engine(e) => e.into(),
            EvalError::Provider(_) => CliError::Provider(e.to_string()),
            EvalError::Io { .. } | EvalError::Parse { .. } => CliError::Other(e.to_string()),
            EvalError::Rank(_) | EvalError::Mismatch(_) | EvalError::Protocol(_) => CliError::Protocol(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
