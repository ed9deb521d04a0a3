fn main() {
    std::process::exit(spd_manova_cli::run(std::env::args_os()));
}
