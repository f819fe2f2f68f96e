fn main() {
    std::process::exit(jumpvol::cli::dispatch(std::env::args_os()));
}
