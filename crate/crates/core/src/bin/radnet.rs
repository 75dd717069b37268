fn main() {
    std::process::exit(radnet::cli::run(std::env::args_os()));
}
