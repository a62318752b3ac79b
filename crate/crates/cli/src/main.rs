use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use sfpe_cli::{compare, output_dir, run, ExperimentConfig, ExperimentKind, RunError};

/// Spectral and particle solvers for singular non-local Fokker-Planck equations.
///
/// The thread count is taken from SFPE_THREADS (default: all cores).
#[derive(Parser)]
#[command(name = "sfpe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    SolveLinear(RunArgs),
    SolveNonlinear(RunArgs),
    Particles(RunArgs),
    VerifyBesov(RunArgs),
    VerifyProduct(RunArgs),
    ContinuityExperiment(RunArgs),
    FkCrosscheck(RunArgs),
    /// Norms of the differences between the binary outputs of two runs.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Also write the report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("SFPE_THREADS") {
        let n: usize = v.parse().map_err(|_| format!("SFPE_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn experiment(kind: ExperimentKind, args: RunArgs) -> Result<bool, RunError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if cfg.experiment != kind {
        return Err(sfpe_cli::ConfigError::Invalid(format!(
            "{} describes a {} experiment, not {}",
            args.config.display(),
            cfg.experiment.name(),
            kind.name()
        ))
        .into());
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let dir = output_dir(&cfg, args.out.as_deref());
    info!("running {} into {}", kind.name(), dir.display());
    let outcome = run(&cfg, &dir)?;
    for c in &outcome.checks {
        println!(
            "{:<6} {:<28} {:>14.6e}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.bound
        );
    }
    println!("artifacts: {}", dir.display());
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = init_threads() {
        error!("{e}");
        return ExitCode::from(2);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SolveLinear(a) => experiment(ExperimentKind::SolveLinear, a),
        Command::SolveNonlinear(a) => experiment(ExperimentKind::SolveNonlinear, a),
        Command::Particles(a) => experiment(ExperimentKind::Particles, a),
        Command::VerifyBesov(a) => experiment(ExperimentKind::VerifyBesov, a),
        Command::VerifyProduct(a) => experiment(ExperimentKind::VerifyProduct, a),
        Command::ContinuityExperiment(a) => experiment(ExperimentKind::ContinuityExperiment, a),
        Command::FkCrosscheck(a) => experiment(ExperimentKind::FkCrosscheck, a),
        Command::Compare { a, b, out } => compare(&a, &b).and_then(|r| {
            for f in &r.files {
                println!(
                    "{:<32} identical={:<5} C^beta={:<12} L1={:<12} max_abs={}",
                    f.name,
                    f.bitwise_identical,
                    f.holder_beta.map_or("-".into(), |v| format!("{v:.3e}")),
                    f.l1.map_or("-".into(), |v| format!("{v:.3e}")),
                    f.max_abs.map_or("-".into(), |v| format!("{v:.3e}")),
                );
            }
            if !r.identical {
                info!("runs differ");
            }
            if let Some(p) = out {
                std::fs::write(&p, serde_json::to_string_pretty(&r)?)?;
            }
            Ok(true)
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
