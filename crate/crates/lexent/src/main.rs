fn main() {
    std::process::exit(lexent::harness::cli::run(std::env::args_os()));
}
