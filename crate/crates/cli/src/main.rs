use clap::Parser;
use dynapsim::commands::{run, Cli};
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DYNAPSIM_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dynapsim: {} error: {e}", e.category());
            ExitCode::from(e.exit_code())
        }
    }
}
