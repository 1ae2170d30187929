fn main() {
    std::process::exit(sirl_cli::run_from(std::env::args_os()));
}
