fn main() {
    std::process::exit(binomcap::cli::run(std::env::args_os()));
}
