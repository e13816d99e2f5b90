fn main() {
    std::process::exit(omtc::cli::run(std::env::args_os()));
}
