fn main() {
    std::process::exit(hca2e::cli::main());
}
