use clap::Parser;

fn main() {
    std::process::exit(pedcoal::cli::main_with(pedcoal::cli::Cli::parse()));
}
