fn main() {
    std::process::exit(opframe_cli::run(std::env::args_os()));
}
