fn main() {
    std::process::exit(jlce::cli::run(std::env::args_os()));
}
