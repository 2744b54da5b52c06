fn main() {
    std::process::exit(cmc_foliation::cli::run());
}
