use clap::Parser;

fn main() {
    let cli = alm_hawkes::cli::Cli::parse();
    std::process::exit(alm_hawkes::cli::main_with(cli));
}
