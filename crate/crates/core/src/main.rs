fn main() {
    std::process::exit(nldc::cli::main());
}
