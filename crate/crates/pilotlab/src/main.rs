fn main() {
    if let Err(e) = pilotlab::cli::run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
