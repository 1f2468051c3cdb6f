fn main() {
    std::process::exit(ionring::cli::main_with_args(std::env::args_os()));
}
