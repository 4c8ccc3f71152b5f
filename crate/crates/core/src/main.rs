fn main() {
    std::process::exit(thrust_gate::cli::run(std::env::args_os()));
}
