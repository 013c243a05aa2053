fn main() {
    std::process::exit(qme::cli::cli_main(std::env::args_os()));
}
