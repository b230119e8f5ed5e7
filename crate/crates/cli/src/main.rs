use clap::Parser;

fn main() {
    let cli = cfslope_cli::Cli::parse();
    if let Err(e) = cfslope_cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
