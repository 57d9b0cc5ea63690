fn main() {
    std::process::exit(noncoercive::cli::main_with_args(std::env::args_os()));
}
