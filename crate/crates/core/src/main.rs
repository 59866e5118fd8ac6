fn main() {
    std::process::exit(gamma_od::cli::main_with_args(std::env::args_os()));
}
