use clap::Parser;

fn main() {
    let cli = habit::cli::Cli::parse();
    if let Err(err) = habit::cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
