fn main() {
    std::process::exit(critlab::cli::main_with_args(std::env::args()));
}
