fn main() {
    std::process::exit(contact_decay::cli::run(std::env::args_os().collect()));
}
