use std::process::ExitCode;

use clap::Parser;
use qpm::cli::Cli;
use qpm::commands::run;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.resolve().and_then(|config| {
        if cli.dump_config {
            println!("{}", serde_json::to_string_pretty(&config)?);
            return Ok(None);
        }
        run(&config).map(Some)
    });
    match result {
        Ok(Some(out)) => {
            println!("{}", out.summary);
            println!("wrote {}", out.path.display());
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
