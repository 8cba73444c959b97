use clap::Parser;

fn main() {
    let cli = onode_cli::args::Cli::parse();
    if let Err(e) = onode_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
