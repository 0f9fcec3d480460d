use std::process::ExitCode;

use clap::Parser;
use whitex_cli::{error_json, run, RunConfig};
use whitex_core::Error;

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var("WHITEX_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Validation(format!(
            "WHITEX_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Validation(format!("cannot configure {n} threads: {e}")))
}

fn main() -> ExitCode {
    let config = RunConfig::parse();
    match configure_threads().and_then(|()| run(&config)) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(Some(config.command), &e));
            ExitCode::FAILURE
        }
    }
}
