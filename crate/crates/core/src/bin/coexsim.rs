fn main() {
    std::process::exit(coexsim::cli::run(std::env::args_os()));
}
