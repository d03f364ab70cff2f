use clap::Parser;

fn main() {
    let cli = wse_di_cli::Cli::parse();
    std::process::exit(wse_di_cli::run(cli));
}
