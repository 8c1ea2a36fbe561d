fn main() {
    std::process::exit(opfactor::cli::run(std::env::args_os()));
}
