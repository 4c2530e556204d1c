fn main() {
    std::process::exit(autoconv_cli::run_cli(std::env::args_os()));
}
