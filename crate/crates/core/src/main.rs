fn main() {
    std::process::exit(dialogue_eval::cli::main_with_args(std::env::args_os()));
}
