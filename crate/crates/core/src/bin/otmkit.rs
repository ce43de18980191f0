fn main() {
    otmkit::cli::init_logging();
    std::process::exit(otmkit::cli::run(std::env::args_os()));
}
