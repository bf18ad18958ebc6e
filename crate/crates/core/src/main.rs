fn main() {
    std::process::exit(ttgcn::cli::main_with_args(std::env::args_os()));
}
