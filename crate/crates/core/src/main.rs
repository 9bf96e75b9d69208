fn main() {
    std::process::exit(iacsi::cli::run(std::env::args_os()));
}
