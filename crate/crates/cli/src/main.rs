fn main() {
    std::process::exit(configlab_cli::run(std::env::args_os()));
}
