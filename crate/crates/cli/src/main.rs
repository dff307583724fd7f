use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use segtrade_cli::{
    cmd_estimate, cmd_mc, cmd_prop1_sweep, cmd_simulate, cmd_solve, CliError, LoadedConfig, RunContext, EXIT_VALIDATION,
};

#[derive(Debug, Parser)]
#[command(name = "segtrade", version, about = "Gender-segmented trade model, shock sweeps, panel simulation and shift-share estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for sweeps, simulation and Monte Carlo; defaults to the available parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Solve one economy and write its equilibrium.
    Solve,
    /// Sign of the ratio response over a grid of destination spending shares and trade costs.
    #[command(name = "prop1-sweep")]
    Prop1Sweep,
    /// Simulate a panel and write its CSV tables.
    Simulate,
    /// Estimate the specification suite on a panel.
    Estimate,
    /// Monte Carlo bias and coverage of the estimator.
    Mc,
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let ctx = RunContext { config: LoadedConfig::read(path)?, out: cli.out.clone(), seed: cli.seed };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Solve => cmd_solve(&ctx),
        Command::Prop1Sweep => cmd_prop1_sweep(&ctx),
        Command::Simulate => cmd_simulate(&ctx),
        Command::Estimate => cmd_estimate(&ctx),
        Command::Mc => cmd_mc(&ctx),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
