use clap::Parser;

fn main() {
    let cli = annulus::cli::Cli::parse();
    std::process::exit(annulus::cli::dispatch(cli));
}
