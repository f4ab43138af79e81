mod args;
mod commands;
mod output;

use clap::Parser;
use std::process::ExitCode;

use args::{config_path, config_tokens, Cli};

fn merged_args() -> Result<Vec<String>, String> {
    let mut argv: Vec<String> = std::env::args().collect();
    if let Some(path) = config_path(&argv) {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let tokens = config_tokens(&text)?;
        // right after the subcommand, so explicit flags come later and win
        let at = argv
            .iter()
            .skip(1)
            .position(|a| !a.starts_with('-'))
            .map_or(argv.len(), |i| i + 2);
        argv.splice(at..at, tokens);
    }
    Ok(argv)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let argv = match merged_args() {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(commands::EXIT_CONFIG);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(commands::EXIT_CONFIG),
            };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
