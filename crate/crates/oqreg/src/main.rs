fn main() {
    std::process::exit(oqreg::cli::run_cli(std::env::args()));
}
