fn main() {
    std::process::exit(twistshock::cli::run(std::env::args_os()));
}
