fn main() {
    std::process::exit(ultracoral_cli::run(std::env::args_os()));
}
