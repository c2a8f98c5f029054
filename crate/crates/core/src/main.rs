use clap::Parser;
use triple_spread::experiments::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
