fn main() {
    std::process::exit(fluidsec_cli::run(std::env::args_os()));
}
