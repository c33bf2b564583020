fn main() {
    std::process::exit(lubsim::cli::parse_and_run(std::env::args_os()));
}
