fn main() {
    std::process::exit(modgraph::cli::run(std::env::args_os()));
}
