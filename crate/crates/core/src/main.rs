fn main() {
    std::process::exit(convlens::cli::dispatch(std::env::args_os()));
}
