fn main() {
    std::process::exit(leakprobe::cli::dispatch(std::env::args_os()));
}
