fn main() {
    std::process::exit(exmo_cli::run(std::env::args_os()));
}
