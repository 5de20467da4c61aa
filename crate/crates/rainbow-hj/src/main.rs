fn main() {
    std::process::exit(rainbow_hj::cli::run_cli());
}
