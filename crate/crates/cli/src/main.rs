use clap::Parser;

fn main() {
    let cli = szr_cli::Cli::parse();
    std::process::exit(szr_cli::run(cli));
}
