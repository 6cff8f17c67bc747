fn main() {
    std::process::exit(stabilikit_cli::run(std::env::args_os()));
}
