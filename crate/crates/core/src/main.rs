fn main() {
    let code = backus::cli::cli_main(std::env::args_os());
    std::process::exit(code);
}
