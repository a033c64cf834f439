fn main() {
    std::process::exit(voracle::cli::run());
}
