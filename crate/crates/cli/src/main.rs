use std::process::ExitCode;

use clap::Parser;
use otseg_cli::{run, Cli, EXIT_NOT_CONVERGED};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("otseg: {e}");
            return ExitCode::FAILURE;
        }
    }
    let stdout = std::io::stdout();
    match run(&cli.command, &mut stdout.lock()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) if cli.allow_maxiter => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("otseg: solver stopped at max_iter before converging (pass --allow-maxiter to accept)");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(e) => {
            eprintln!("otseg: {e}");
            ExitCode::FAILURE
        }
    }
}
