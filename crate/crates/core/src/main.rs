fn main() {
    std::process::exit(tamed_sde::cli::main_with_args(std::env::args_os()));
}
