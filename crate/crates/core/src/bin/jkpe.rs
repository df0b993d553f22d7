fn main() {
    std::process::exit(jkpe::cli::run(std::env::args_os()));
}
