fn main() {
    std::process::exit(exo_observer::cli::run());
}
