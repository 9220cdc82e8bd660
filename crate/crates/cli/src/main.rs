fn main() {
    std::process::exit(macex_cli::run(std::env::args_os()));
}
