fn main() { std::process::exit(fluxchain_cli::run(std::env::args().collect())) }
