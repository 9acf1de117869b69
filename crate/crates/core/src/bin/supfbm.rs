fn main() {
    std::process::exit(supfbm::cli::main_with_args(std::env::args_os()));
}
