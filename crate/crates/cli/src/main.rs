fn main() {
    std::process::exit(mismatch_cli::run(std::env::args_os()));
}
