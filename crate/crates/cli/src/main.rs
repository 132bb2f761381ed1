use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use gpci_cli::commands;
use gpci_cli::{read_config, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "gpci", version, about = "Geometric-phase nuclear dynamics near conical intersections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `section.key=value`, applied after the file is read.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce an LVC table to subsystem-bath form.
    Transform(Common),
    /// Propagate the configured model.
    Run(Common),
    /// Perturbative transfer-channel estimates.
    Tdpt(Common),
    /// Discretized bath modes and correlation functions.
    Bath(Common),
    /// Run several configurations on a worker pool.
    Sweep {
        /// Configuration files; repeatable.
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// `section.key=v1,v2,...`: one member per value.
        #[arg(long)]
        vary: Option<String>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn load(c: &Common) -> Result<(RunConfig, PathBuf), CliError> {
    let config = read_config(&c.config, &c.overrides)?;
    let out = c.out.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));
    Ok((config, out))
}

fn single(c: &Common, f: fn(&RunConfig, &std::path::Path) -> Result<(), CliError>) -> Result<PathBuf, CliError> {
    let (config, out) = load(c)?;
    f(&config, &out)?;
    Ok(out)
}

fn report(e: &CliError) -> ExitCode {
    eprintln!("gpci: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Transform(c) => single(c, commands::transform),
        Command::Run(c) => single(c, commands::run),
        Command::Tdpt(c) => single(c, commands::tdpt),
        Command::Bath(c) => single(c, commands::bath),
        Command::Sweep {
            configs,
            out,
            overrides,
            vary,
            workers,
        } => {
            let jobs = match commands::sweep_jobs(configs, overrides, vary.as_deref()) {
                Ok(j) => j,
                Err(e) => return report(&e),
            };
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let failures = commands::sweep(&jobs, out, workers);
            for (name, e) in &failures {
                eprintln!("gpci: sweep member {name}: {e}");
            }
            let status = commands::sweep_status(&failures);
            if status == 0 {
                eprintln!("wrote {} runs under {}", jobs.len(), out.display());
            }
            return ExitCode::from(status as u8);
        }
    };
    match result.with_context(|| "gpci failed") {
        Ok(out) => {
            eprintln!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = e.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            eprintln!("gpci: {e:#}");
            ExitCode::from(code as u8)
        }
    }
}
