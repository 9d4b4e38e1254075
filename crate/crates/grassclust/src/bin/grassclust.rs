fn main() {
    let code = grassclust::cli::run(std::env::args_os());
    std::process::exit(code);
}
