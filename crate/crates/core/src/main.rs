fn main() {
    std::process::exit(symdyn::cli::run(std::env::args_os()));
}
