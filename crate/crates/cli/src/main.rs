fn main() {
    std::process::exit(gtrs_cli::run(std::env::args_os()));
}
