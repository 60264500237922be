fn main() {
    std::process::exit(hawc_core::cli::main());
}
