fn main() {
    std::process::exit(dphase_cli::run(std::env::args_os()));
}
