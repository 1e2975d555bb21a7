fn main() {
    std::process::exit(starwave::cli::run_cli(std::env::args_os()));
}
