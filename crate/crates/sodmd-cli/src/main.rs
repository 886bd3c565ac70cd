use clap::Parser;
use sodmd_cli::commands::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        eprintln!("error: {error}");
        std::process::exit(sodmd_cli::exit_code(&error));
    }
}
