fn main() {
    std::process::exit(seglab_cli::main_with_args(std::env::args_os()));
}
