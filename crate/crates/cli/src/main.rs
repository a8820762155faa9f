use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = realign_cli::Cli::parse();
    match realign_cli::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
