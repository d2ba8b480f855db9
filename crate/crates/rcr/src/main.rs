fn main() {
    std::process::exit(rcr::cli::main_with_args(std::env::args_os()));
}
