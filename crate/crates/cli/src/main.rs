use clap::Parser;

fn main() {
    let cli = cvqec_cli::Cli::parse();
    std::process::exit(cvqec_cli::run(cli));
}
