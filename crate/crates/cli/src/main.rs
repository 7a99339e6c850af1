fn main() {
    std::process::exit(kronschro_cli::run(std::env::args_os()));
}
