fn main() {
    std::process::exit(seqparadox::cli::run());
}
