fn main() {
    std::process::exit(shallow_nv::cli::run(std::env::args_os()));
}
