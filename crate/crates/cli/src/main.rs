fn main() {
    std::process::exit(sleepstage_cli::run_cli(std::env::args_os()));
}
