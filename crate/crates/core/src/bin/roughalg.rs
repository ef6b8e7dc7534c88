fn main() {
    std::process::exit(roughalg::cli::main_with_args(std::env::args_os()));
}
