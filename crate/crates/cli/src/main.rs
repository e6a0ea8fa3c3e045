fn main() {
    std::process::exit(ziegler_cli::run(std::env::args_os()));
}
