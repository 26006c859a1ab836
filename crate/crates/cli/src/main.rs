fn main() {
    std::process::exit(abstain_cli::run(std::env::args_os()));
}
