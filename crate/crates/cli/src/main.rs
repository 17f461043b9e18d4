use clap::Parser;

fn main() {
    let cli = cccp::cli::Cli::parse();
    if let Err(err) = cccp::cli::execute(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
