fn main() {
    std::process::exit(rbound::cli::run_from(std::env::args_os()));
}
