fn main() {
    std::process::exit(aif_cli::main_with_args(std::env::args_os()));
}
