fn main() {
    std::process::exit(smrmr::cli::run(std::env::args_os()));
}
