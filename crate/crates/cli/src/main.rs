use clap::Parser;
use direntropy_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let level = if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    env_logger::Builder::new().filter_level(level).init();
    if let Err(e) = run(&cli) {
        eprintln!("direntropy: {e}");
        std::process::exit(e.exit_code());
    }
}
