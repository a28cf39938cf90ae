fn main() {
    if let Err(e) = jabber_harness::stubgame::run(std::env::args().skip(1)) {
        eprintln!("stub-game: {e}");
        std::process::exit(2);
    }
}
