fn main() {
    std::process::exit(phasebell::cli::run(std::env::args_os()));
}
