fn main() {
    std::process::exit(kiml::cli::run(std::env::args_os()));
}
