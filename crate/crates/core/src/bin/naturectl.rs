fn main() {
    std::process::exit(nature_disclosure::cli::main_with_args(std::env::args_os()));
}
