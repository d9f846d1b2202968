fn main() {
    std::process::exit(fretwise::cli::run(std::env::args_os()));
}
