fn main() {
    std::process::exit(ehr_priority::cli::run(std::env::args_os()));
}
