fn main() {
    std::process::exit(cryptosim::cli_dispatch(std::env::args_os()));
}
