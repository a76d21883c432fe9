fn main() {
    std::process::exit(cmfseg::cli::run_cli(std::env::args_os()));
}
