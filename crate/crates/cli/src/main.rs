use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use dnl_cli::error::EXIT_OK;
use dnl_cli::{run_all, Command};

/// Doubly nonlinear diffusion laboratory.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    command: Command,
    /// One config per run; several configs run concurrently.
    #[arg(required = true)]
    configs: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut code = EXIT_OK;
    for (path, res) in cli.configs.iter().zip(run_all(cli.command, &cli.configs)) {
        match res {
            Ok(dir) => println!(
                "{} {}: ok -> {}",
                cli.command.name(),
                path.display(),
                dir.display()
            ),
            Err(e) => {
                eprintln!("{} {}: {e}", cli.command.name(), path.display());
                code = code.max(e.exit_code());
            }
        }
    }
    ExitCode::from(code as u8)
}
