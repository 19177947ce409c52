fn main() {
    std::process::exit(vmrock::cli::run());
}
