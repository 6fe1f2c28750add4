fn main() {
    std::process::exit(ccdetect::cli::run(std::env::args_os()));
}
