fn main() {
    std::process::exit(edgeplan::cli::run(std::env::args_os()));
}
