fn main() {
    std::process::exit(pairspin_cli::run(std::env::args_os()));
}
