mod bench;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

/// Errors split by exit code: configuration mistakes exit 2, failures while
/// actually running exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> CliError {
        CliError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> CliError {
        CliError::Runtime(msg.into())
    }

    /// Wrap a library error, naming the stage it came from.  Parameter-range
    /// and cluster-count complaints are configuration problems; everything
    /// else happened at run time.
    pub fn lib(stage: &str, e: planeclust::Error) -> CliError {
        match e {
            planeclust::Error::InvalidParam { .. } | planeclust::Error::BadClusterCount { .. } => {
                CliError::Config(format!("{stage}: {e}"))
            }
            other => CliError::Runtime(format!("{stage}: {other}")),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) | CliError::Runtime(msg) => f.write_str(msg),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "planeclust",
    version,
    about = "Plane-based clustering: RampTWSVC with kmeans/kPC/PPC baselines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand)]
enum Command {
    /// Fit a clustering model and write labels, model file, and a summary line
    Cluster(commands::ClusterArgs),
    /// Compute AC and MI between predicted labels and ground truth
    Eval(commands::EvalArgs),
    /// Grid-search benchmark over datasets and methods with summary tables
    Bench(bench::BenchArgs),
    /// Export ramp/reference loss curves over a deviation grid as CSV
    Losscurve(commands::LosscurveArgs),
}

/// Workers: flag first, capped by PLANECLUST_THREADS; default rayon's choice
/// under the same cap.
fn init_workers(flag: Option<usize>) -> Result<(), CliError> {
    let cap = match std::env::var("PLANECLUST_THREADS") {
        Ok(raw) => Some(raw.parse::<usize>().map_err(|e| {
            CliError::config(format!("PLANECLUST_THREADS={raw}: {e}"))
        })?),
        Err(_) => None,
    };
    let threads = match (flag, cap) {
        (Some(f), Some(c)) => Some(f.min(c)),
        (Some(f), None) => Some(f),
        (None, Some(c)) => Some(c),
        (None, None) => None,
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::config("worker count must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<(), CliError> {
        match cli.command {
            Command::Cluster(args) => {
                init_workers(args.workers)?;
                commands::cluster(args)
            }
            Command::Eval(args) => commands::eval(args),
            Command::Bench(args) => {
                init_workers(args.workers)?;
                bench::bench(args)
            }
            Command::Losscurve(args) => commands::losscurve(args),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
