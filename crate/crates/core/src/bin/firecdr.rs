fn main() {
    env_logger::init();
    std::process::exit(firecdr::cli::run(std::env::args_os()));
}
