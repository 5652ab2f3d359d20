fn main() {
    std::process::exit(agreesim::cli::main());
}
