fn main() {
    std::process::exit(isoprefs::cli::run(std::env::args_os()));
}
