fn main() {
    let code = newton_imbed::cli::run_main(std::env::args_os());
    std::process::exit(code);
}
