fn main() {
    std::process::exit(fluidest_cli::run(std::env::args_os()));
}
