fn main() {
    std::process::exit(padkit::cli::main_with_args(std::env::args_os()));
}
