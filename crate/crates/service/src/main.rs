fn main() {
    std::process::exit(a2t_service::cli::run(std::env::args().collect()));
}
