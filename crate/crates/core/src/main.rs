use clap::Parser;

fn main() {
    std::process::exit(klm::cli::run_cli(klm::cli::Cli::parse()));
}
