fn main() {
    std::process::exit(qms_core::cli::run(std::env::args_os()));
}
