fn main() {
    std::process::exit(lrcd::cli::main_with(std::env::args_os()));
}
