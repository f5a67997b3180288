fn main() {
    std::process::exit(selinf::cli::run(std::env::args_os()));
}
