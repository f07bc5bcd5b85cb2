fn main() {
    std::process::exit(llb_cli::cli_main(std::env::args_os()));
}
