use std::process::ExitCode;

use clap::Parser;
use dfgnoise::cli::{self, Cli};

fn main() -> ExitCode {
    let args = Cli::parse();
    match cli::run(&args) {
        Ok(written) => {
            if matches!(args.command, cli::Command::ValidateConfig) {
                println!("config ok");
            }
            for path in written {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
