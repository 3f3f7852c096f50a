use clap::Parser;

fn main() {
    let cli = gorom::cli::Cli::parse();
    if let Err(e) = gorom::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
