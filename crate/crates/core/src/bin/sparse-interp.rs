fn main() {
    std::process::exit(sparse_interp::cli::dispatch(std::env::args_os()));
}
