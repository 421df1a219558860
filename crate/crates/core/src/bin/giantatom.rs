fn main() {
    std::process::exit(giant_atoms::cli::run(std::env::args_os()));
}
