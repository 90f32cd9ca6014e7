fn main() {
    std::process::exit(lessnoisy_cli::run(std::env::args_os()));
}
