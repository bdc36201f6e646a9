fn main() {
    std::process::exit(ringmem_cli::run_subcommand(std::env::args_os()));
}
