use clap::Parser;

fn main() {
    let cli = memread::cli::Cli::parse();
    std::process::exit(memread::cli::main_with(cli));
}
