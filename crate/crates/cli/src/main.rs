use clap::Parser;

use reliance_cli::{error_json, exit_code, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{}", error_json(&e));
        std::process::exit(exit_code(&e));
    }
}
