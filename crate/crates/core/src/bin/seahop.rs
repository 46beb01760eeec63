fn main() {
    std::process::exit(sea_hopper::cli::cli_main(std::env::args_os()));
}
