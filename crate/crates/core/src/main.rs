fn main() {
    std::process::exit(xmr::cli::run_command(std::env::args_os()));
}
