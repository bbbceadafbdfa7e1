fn main() {
    std::process::exit(bnr_core::cli::run(std::env::args_os()));
}
