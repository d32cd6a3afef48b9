fn main() {
    waitmarket::cli::init_threads();
    std::process::exit(waitmarket::cli::main_with_args(std::env::args_os()));
}
