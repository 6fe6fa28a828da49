fn main() {
    std::process::exit(selfsim_cli::run(std::env::args_os()));
}
