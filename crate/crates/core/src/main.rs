use clap::Parser;
use tobit_horseshoe::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("tobit-hs: {e}");
        std::process::exit(e.exit_code());
    }
}
