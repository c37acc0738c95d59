fn main() {
    std::process::exit(ergomoment_cli::app::main_with_args(std::env::args_os()));
}
