fn main() {
    std::process::exit(trait_tuner::cli::dispatch(std::env::args_os()));
}
