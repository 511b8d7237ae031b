fn main() {
    std::process::exit(synseg_cli::run(std::env::args_os()));
}
