fn main() {
    std::process::exit(hypersense::cli::run_command(std::env::args()));
}
