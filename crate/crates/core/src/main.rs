fn main() {
    std::process::exit(trialmarket::cli::main());
}
