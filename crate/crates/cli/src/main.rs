//! `shapley-gsa`: runs sensitivity experiments described by TOML files and
//! writes CSV tables plus a JSON manifest.

mod config;
mod error;
mod output;
mod problem;
mod run;
mod validate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;
use output::RunInfo;
use problem::Problem;

#[derive(Parser)]
#[command(name = "shapley-gsa", version, about = "Shapley effects and Sobol' indices for dependent inputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shapley effects by the exact or random permutation method.
    Shapley(Estimate),
    /// Full and independent Sobol' indices by the Rosenblatt-transform scheme.
    SobolRt(Estimate),
    /// Coverage of bootstrap intervals over repeated runs.
    Poc(Estimate),
    /// Fit a kriging metamodel.
    FitGp(Estimate),
    /// Shapley effects of a kriging metamodel with the error split.
    ShapleyGp(Estimate),
    /// Run whatever method the config names; the seed may come from the file.
    Run(RunArgs),
    /// Check a config without running it.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct Estimate {
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, overriding `output` in the config.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn accepts(command: &str, method: &str) -> bool {
    match command {
        "shapley" => matches!(method, "shapley-exact" | "shapley-random"),
        "run" => true,
        _ => command == method,
    }
}

fn estimate(command: &str, path: &Path, seed: Option<u64>, common: &Common) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(path)?;
    if !accepts(command, cfg.method.name()) {
        return Err(CliError::Config(format!(
            "subcommand {command} cannot run method {}; use `run` or the matching subcommand",
            cfg.method.name()
        )));
    }
    let seed = seed
        .or(cfg.seed)
        .ok_or_else(|| CliError::Config("no seed: pass --seed or set `seed` in the config".into()))?;
    cfg.seed = Some(seed);
    if let Some(out) = &common.output {
        cfg.output = Some(out.clone());
    }
    let dir = cfg
        .output
        .clone()
        .ok_or_else(|| CliError::Config("no output directory: pass --output or set `output` in the config".into()))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let threads = pool.current_num_threads();
    let start = Instant::now();
    let artifacts = pool.install(|| {
        let problem = Problem::build(&cfg)?;
        run::execute(&cfg, &problem, seed)
    })?;
    let info = RunInfo { command, seed, threads, config: &cfg, wall_clock_seconds: start.elapsed().as_secs_f64() };
    output::write_all(&dir, &artifacts, &info)?;
    eprintln!("wrote {} ({} model evaluations)", dir.display(), artifacts.evaluations);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Shapley(a) => estimate("shapley", &a.config, Some(a.seed), &a.common),
        Command::SobolRt(a) => estimate("sobol-rt", &a.config, Some(a.seed), &a.common),
        Command::Poc(a) => estimate("poc", &a.config, Some(a.seed), &a.common),
        Command::FitGp(a) => estimate("fit-gp", &a.config, Some(a.seed), &a.common),
        Command::ShapleyGp(a) => estimate("shapley-gp", &a.config, Some(a.seed), &a.common),
        Command::Run(a) => estimate("run", &a.config, a.seed, &a.common),
        Command::Validate { config } => {
            for line in validate::diagnostics(config) {
                println!("{line}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
