fn main() {
    std::process::exit(mpsca_bench::cli::run(std::env::args_os()));
}
