fn main() {
    std::process::exit(latgraph_cli::run(std::env::args_os()));
}
