fn main() {
    std::process::exit(qdrap::cli::main_with_args(std::env::args_os()));
}
