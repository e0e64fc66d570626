fn main() {
    std::process::exit(symrec_cli::run(std::env::args_os()));
}
