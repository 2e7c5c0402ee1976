fn main() {
    std::process::exit(stlsynth::cli::run(std::env::args_os()));
}
