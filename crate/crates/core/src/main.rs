fn main() {
    std::process::exit(dtmm::cli::run(std::env::args_os()));
}
