fn main() {
    std::process::exit(proximate::cli::run(std::env::args_os()));
}
