use std::io;
use std::process::ExitCode;

use clap::Parser;
use legalner_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = run(&cli, &mut io::stdout().lock());
    ExitCode::from(code as u8)
}
