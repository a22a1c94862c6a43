fn main() {
    std::process::exit(errfilt::cli::main_with_args(std::env::args_os()));
}
