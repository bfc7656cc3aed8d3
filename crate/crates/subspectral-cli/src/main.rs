fn main() {
    std::process::exit(subspectral_cli::cli_main(std::env::args_os()));
}
