fn main() {
    std::process::exit(filterlab_harness::cli::run(std::env::args_os()));
}
