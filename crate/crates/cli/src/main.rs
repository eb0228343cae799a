fn main() {
    std::process::exit(topoflux_cli::run_cli(std::env::args_os()));
}
