fn main() {
    std::process::exit(robustikit::cli::run())
}
