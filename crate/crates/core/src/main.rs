fn main() {
    std::process::exit(structured2d::cli::run(std::env::args_os()));
}
