fn main() {
    std::process::exit(uwqkd::cli::run(std::env::args_os()));
}
