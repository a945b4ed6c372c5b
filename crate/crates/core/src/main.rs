fn main() {
    std::process::exit(magshell::cli::dispatch(std::env::args_os()));
}
