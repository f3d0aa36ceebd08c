fn main() {
    std::process::exit(rtnep::cli::run(std::env::args_os()));
}
