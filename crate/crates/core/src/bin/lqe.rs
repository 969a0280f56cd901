fn main() {
    std::process::exit(lqe_core::cli::main());
}
