fn main() {
    if let Err(e) = mvem::cli::run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
