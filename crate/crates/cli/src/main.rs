use clap::Parser;
use excouple_cli::{exit, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(exit::exit_code(&e));
    }
}
