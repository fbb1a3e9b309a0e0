use clap::Parser;

fn main() {
    let cli = flare_lqt::cli::Cli::parse();
    std::process::exit(flare_lqt::cli::run(cli));
}
