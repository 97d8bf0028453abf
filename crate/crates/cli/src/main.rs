fn main() {
    std::process::exit(heislab_cli::cli_main(std::env::args_os()));
}
