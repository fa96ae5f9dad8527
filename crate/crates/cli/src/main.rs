fn main() {
    std::process::exit(relaxflow_cli::main_with_args(std::env::args().collect()));
}
