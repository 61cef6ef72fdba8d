fn main() {
    std::process::exit(otsense_cli::run_cli(std::env::args_os()));
}
