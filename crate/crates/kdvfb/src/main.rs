fn main() {
    std::process::exit(kdvfb::cli_experiments::cli::run_cli(std::env::args_os()));
}
