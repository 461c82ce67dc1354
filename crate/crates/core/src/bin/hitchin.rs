fn main() {
    std::process::exit(hitchin_core::cli::run(std::env::args_os()));
}
