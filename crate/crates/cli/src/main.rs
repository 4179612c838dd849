use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use airfc_cli::commands::{cmd_optimize, cmd_sweep, cmd_validate, Overrides};

/// Over-the-air FC layer through multi-hop AF relays.
#[derive(Parser)]
#[command(name = "airfc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one channel realization and export the solution and trace.
    Optimize(RunArgs),
    /// Run the Monte-Carlo sweep over the configured grid.
    Sweep(RunArgs),
    /// Check a configuration file without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 = all cores, 1 = sequential.
    #[arg(long)]
    workers: Option<usize>,
    /// Base seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_plots: bool,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            workers: self.workers,
            seed: self.seed,
            no_plots: self.no_plots,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Optimize(a) => cmd_optimize(&a.config, &a.overrides()),
        Command::Sweep(a) => cmd_sweep(&a.config, &a.overrides()),
        Command::Validate { config } => cmd_validate(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
