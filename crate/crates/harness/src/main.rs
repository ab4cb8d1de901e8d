use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use llbar_harness::{configure_threads, run, Experiment, ExperimentConfig, HarnessError, Result};

#[derive(Parser)]
#[command(name = "llbar", version, about = "Run LLBar / convective CH-AC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and record its diagnostics.
    Simulate(RunArgs),
    /// Integrate a trajectory and a perturbed copy and record their distance.
    Compare(RunArgs),
    /// Distance at the final time between each eps and eps = 0.
    SweepEps(RunArgs),
    /// Relax to a steady state and fit the decay of the effective field.
    Steady(RunArgs),
    /// Compare the stepper against the Galerkin RK4 oracle.
    OracleCheck(RunArgs),
    /// Audit product-rule identities and term inequalities on random pairs.
    Audit(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 4 when an acceptance threshold fails.
    #[arg(long)]
    assert: bool,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(cli: Cli) -> Result<bool> {
    let (experiment, args) = match cli.command {
        Command::Simulate(a) => (Experiment::Simulate, a),
        Command::Compare(a) => (Experiment::Compare, a),
        Command::SweepEps(a) => (Experiment::SweepEps, a),
        Command::Steady(a) => (Experiment::Steady, a),
        Command::OracleCheck(a) => (Experiment::OracleCheck, a),
        Command::Audit(a) => (Experiment::Audit, a),
    };
    configure_threads()?;
    let text = fs::read_to_string(&args.config).map_err(|e| HarnessError::io(&args.config, e))?;
    let mut cfg: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", args.config.display())))?;
    cfg.experiment = experiment;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.output.dir = out;
    }
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    let report = run(&cfg, &dir)?;
    for c in &report.checks {
        println!(
            "{} {}: {:e} ({})",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.value,
            c.requirement
        );
    }
    for a in &report.artifacts {
        println!("wrote {}", a.display());
    }
    if args.assert && !report.passed() {
        let names: Vec<&str> = report.failures().iter().map(|c| c.name.as_str()).collect();
        return Err(HarnessError::Assert(names.join(", ")));
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
