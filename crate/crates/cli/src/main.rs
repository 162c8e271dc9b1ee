use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use deceptive_lq_cli::config::{self, OutputFormat};
use deceptive_lq_cli::{apply_overrides, execute, validate, CliError, Command, Overrides};

/// Simulate LQ dynamic games with private types.
#[derive(Parser)]
#[command(name = "dlq", version)]
struct Cli {
    #[command(subcommand)]
    command: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Simulate one episode per cell and write its trajectories.
    Run(Common),
    /// Monte-Carlo replications over every cell of the sweep grid.
    Sweep(Common),
    /// Check the game and report the conditioning of each backward pass.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replanning period of every level-t player; 0 replans every stage.
    #[arg(long)]
    level: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(common: Common, command: Command) -> Result<(), CliError> {
    let mut cfg = config::load(&common.config)?;
    let o = Overrides { seed: common.seed, reps: common.reps, out: common.out, level: common.level, format: common.format };
    apply_overrides(&mut cfg, &o)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let dir = pool.install(|| execute(&cfg, command))?;
    println!("{}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Verb::Run(c) => run(c, Command::Run),
        Verb::Sweep(c) => run(c, Command::Sweep),
        Verb::Validate { config } => config::load(&config).and_then(|cfg| {
            let v = validate::validate(&cfg)?;
            print!("{}", v.report);
            if v.passed {
                Ok(())
            } else {
                Err(CliError::Solver("validation failed".into()))
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dlq: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
