use clap::Parser;

fn main() {
    let cli = neurocross_cli::Cli::parse();
    std::process::exit(neurocross_cli::run(&cli));
}
