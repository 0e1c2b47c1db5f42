fn main() {
    std::process::exit(semota::cli::run());
}
