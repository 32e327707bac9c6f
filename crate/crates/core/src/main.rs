fn main() {
    std::process::exit(chaosradio::cli::run(std::env::args().collect()));
}
