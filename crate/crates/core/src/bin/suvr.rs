fn main() {
    std::process::exit(suvr::cli::run(std::env::args_os()));
}
