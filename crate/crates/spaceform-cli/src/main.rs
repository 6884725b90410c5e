fn main() {
    std::process::exit(spaceform_cli::run(std::env::args_os()));
}
