fn main() {
    std::process::exit(plenumlab::cli::run_command(std::env::args_os()));
}
