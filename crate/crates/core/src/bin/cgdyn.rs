fn main() {
    std::process::exit(cgcore::cli::cgdyn_main(std::env::args().collect()));
}
