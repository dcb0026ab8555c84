fn main() {
    std::process::exit(argeval::cli_main());
}
