use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dpi_cli::{commands, parse_config, workers_from_env, Failure, RunConfig};

/// Deep Picard iteration for high-dimensional parabolic PDEs.
#[derive(Parser)]
#[command(name = "dpi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a network by Picard iteration and write metrics, report and checkpoint.
    Solve(Common),
    /// Second moments of the naive and control-variate gradient estimators near the horizon.
    Variance(Common),
    /// Check the label estimators against the heat equation's closed form.
    FkCheck(Common),
    /// Reverse-time samples from the Gaussian-mixture problem.
    Sample(Common),
    /// Evaluate a saved network on the held-out set.
    EvalCheckpoint(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set dpi.K=5`. Applied in order, after the file.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (same as `--set output.dir=...`).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = parse_config(self.config.as_deref(), &self.set)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

type CommandFn = fn(&RunConfig) -> Result<(), Failure>;

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = workers_from_env()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Run(format!("worker pool: {e}")))?;
    }
    let (common, cmd): (&Common, CommandFn) = match &cli.command {
        Command::Solve(c) => (c, |cfg| commands::solve(cfg).map(drop)),
        Command::Variance(c) => (c, |cfg| commands::variance(cfg).map(drop)),
        Command::FkCheck(c) => (c, |cfg| commands::fk_check(cfg).map(drop)),
        Command::Sample(c) => (c, |cfg| commands::sample(cfg).map(drop)),
        Command::EvalCheckpoint(c) => (c, |cfg| commands::eval_checkpoint(cfg).map(drop)),
    };
    let cfg = common.resolve()?;
    if common.print_config {
        print!("{}", cfg.echo());
        return Ok(());
    }
    cmd(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dpi: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
