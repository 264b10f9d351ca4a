fn main() {
    std::process::exit(hubscan::cli::run(std::env::args_os()));
}
