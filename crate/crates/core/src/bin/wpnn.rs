fn main() {
    std::process::exit(wpnn::harness::cli::cli_main(std::env::args_os()));
}
