fn main() {
    std::process::exit(decoctl::cli::main_with_args(std::env::args_os()));
}
