fn main() {
    std::process::exit(permreg::cli::run(std::env::args_os()));
}
