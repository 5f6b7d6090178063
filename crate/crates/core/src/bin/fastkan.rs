use clap::Parser;

fn main() {
    std::process::exit(fastkan::cli::run(fastkan::cli::Cli::parse()));
}
