fn main() {
    std::process::exit(token_screen::cli::main_with_args(std::env::args_os()));
}
