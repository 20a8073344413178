fn main() {
    std::process::exit(riskrec::cli::run(std::env::args_os()));
}
