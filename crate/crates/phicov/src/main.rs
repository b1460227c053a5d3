fn main() {
    std::process::exit(phicov::cli::run());
}
