fn main() {
    std::process::exit(monolite::cli::run(std::env::args_os()));
}
