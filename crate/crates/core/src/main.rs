fn main() {
    std::process::exit(geomech::cli::run(std::env::args_os()));
}
