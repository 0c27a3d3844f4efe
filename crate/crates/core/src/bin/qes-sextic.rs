fn main() {
    std::process::exit(qes_sextic::cli::run(std::env::args_os()));
}
