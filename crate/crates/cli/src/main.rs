use clap::Parser;
use edgeuq_cli::{run, Cli};

fn main() {
    match run(Cli::parse()) {
        Ok(text) => print!("{text}"),
        Err(failure) => {
            eprintln!("{failure}");
            std::process::exit(failure.exit_code());
        }
    }
}
