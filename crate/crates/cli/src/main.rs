fn main() {
    std::process::exit(tfi_cli::run(std::env::args_os()));
}
