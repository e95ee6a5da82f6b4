fn main() {
    std::process::exit(nestfact::cli::main_with_args(std::env::args_os()));
}
