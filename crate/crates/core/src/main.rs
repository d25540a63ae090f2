fn main() {
    std::process::exit(barrier_ae::cli::run());
}
