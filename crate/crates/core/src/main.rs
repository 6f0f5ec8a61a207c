use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use torus_cascade::config::{BetaKind, RunConfig, DEFAULT_CONFIG_TOML};
use torus_cascade::pipeline::{cmd_family, cmd_report, cmd_schedule, cmd_simulate, StageOutcome};
use torus_cascade::Result;

#[derive(Parser)]
#[command(name = "torus-cascade", version, about = "Energy cascade on the 2-torus: build, simulate and analyse a driven cascade")]
struct Cli {
    /// TOML run configuration; every key is optional
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Integrator tolerance (overrides `tol`)
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Drive amplitude convention (overrides `beta_mode`)
    #[arg(long, global = true, value_enum)]
    beta_mode: Option<BetaArg>,
    /// Number of cascade cycles (overrides `cycles`)
    #[arg(long, global = true)]
    cycles: Option<usize>,
    /// Print the documented default configuration and exit
    #[arg(long)]
    print_default_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BetaArg {
    Paper,
    Scaled,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Construct and certify the frequency family
    Family,
    /// Build the drive schedule from the family
    Schedule,
    /// Integrate the chain, resonant, full and perturbation dynamics
    Simulate,
    /// Norms, bound curves and acceptance criteria from the simulated run
    Report,
}

fn config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(t) = cli.tol {
        cfg.tol = t;
    }
    if let Some(b) = cli.beta_mode {
        cfg.beta_mode = match b {
            BetaArg::Paper => BetaKind::Paper,
            BetaArg::Scaled => BetaKind::Scaled,
        };
    }
    if let Some(c) = cli.cycles {
        cfg.cycles = c;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cfg: &RunConfig, command: Command) -> Result<StageOutcome> {
    match command {
        Command::Family => cmd_family(cfg),
        Command::Schedule => cmd_schedule(cfg),
        Command::Simulate => cmd_simulate(cfg),
        Command::Report => cmd_report(cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_default_config {
        print!("{DEFAULT_CONFIG_TOML}");
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (family, schedule, simulate, report); see --help");
        return ExitCode::from(2);
    };
    match config(&cli).and_then(|cfg| run(&cfg, command)) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.verified {
                ExitCode::SUCCESS
            } else {
                eprintln!("verification failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
