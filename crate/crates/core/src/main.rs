fn main() {
    std::process::exit(mfe_core::cli::run());
}
