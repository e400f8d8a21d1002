use clap::Parser;
use curvflow::cli::{run_cli, Cli};
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_cli(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            println!(
                "{} -> {}",
                if outcome.passed { "PASS" } else { "FAIL" },
                outcome.dir.display()
            );
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {:#}", anyhow::Error::from(e));
            ExitCode::from(2)
        }
    }
}
