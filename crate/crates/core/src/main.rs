fn main() {
    std::process::exit(probgraph::cli::main_with(std::env::args_os()));
}
