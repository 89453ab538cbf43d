use clap::Parser;

fn main() {
    std::process::exit(footprint_cli::run(footprint_cli::Cli::parse()));
}
