use clap::Parser;

fn main() {
    let cli = l0break_cli::Cli::parse();
    if let Err(e) = l0break_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
