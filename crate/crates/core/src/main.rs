fn main() {
    std::process::exit(kno::harness::cli::main_with_args(std::env::args_os()));
}
