fn main() {
    std::process::exit(powermap_cli::run_from(std::env::args_os()));
}
