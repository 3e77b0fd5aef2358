fn main() {
    std::process::exit(sgg_lab::cli::main());
}
