use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = koopman_po_cli::Cli::parse();
    match koopman_po_cli::main_with(cli) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
