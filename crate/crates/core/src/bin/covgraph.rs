fn main() {
    std::process::exit(covgraph::cli::run(std::env::args_os()));
}
