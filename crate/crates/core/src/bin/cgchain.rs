fn main() {
    std::process::exit(cgcore::cli::cgchain_main(std::env::args().collect()));
}
