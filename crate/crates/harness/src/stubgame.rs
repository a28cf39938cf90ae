//! A tiny scripted text game for exercising the agent loop.

use std::io::{BufRead, Write};

pub const BANNER: &str =
    "THE GOSTAK (a stub)\nYou are the gostak, in the delcot of tondam. The glauds are in the loff lutt.";

/// Answer to one command, and whether the game ends with it.
pub fn respond(command: &str) -> (&'static str, bool) {
    let c = command.trim().trim_end_matches(['.', '!']).to_lowercase();
    let c = c.split_whitespace().collect::<Vec<_>>().join(" ");
    match c.as_str() {
        "quit" | "q" => ("Farewell.", true),
        "look" | "l" => (
            "You are in the delcot of tondam, where gitches are fraped. The glauds are in the loff lutt.",
            false,
        ),
        "vorl glauds" => ("Which do you mean, the glaud or the glaud-with-roggler?", false),
        "vorl glaud" | "vorl glaud-with-roggler" | "vorl the glaud-with-roggler" => {
            ("Vorling is the fesh of ghelipers.", false)
        }
        "distim gitch" | "distim the gitch" => ("You distim one, but it frikes fosken.", false),
        "inventory" | "i" => ("You are doshing a jirf.", false),
        _ => ("That's not a dape I recognise.", false),
    }
}

/// Runs the game on stdin/stdout. Options: `--banner TEXT`, `--marker M`,
/// and `--no-prompt` (never print a marker).
pub fn run<I: IntoIterator<Item = String>>(args: I) -> std::io::Result<()> {
    let mut banner = BANNER.to_string();
    let mut marker = Some(">".to_string());
    let mut args = args.into_iter();
    while let Some(a) = args.next() {
        match a.as_str() {
            "--banner" => banner = args.next().unwrap_or_default(),
            "--marker" => marker = args.next(),
            "--no-prompt" => marker = None,
            other => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidInput,
                    format!("unknown option {other}"),
                ))
            }
        }
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let emit = |out: &mut std::io::StdoutLock, text: &str, prompt: bool| -> std::io::Result<()> {
        match (&marker, prompt) {
            (Some(m), true) => write!(out, "{text}\n{m}")?,
            _ => writeln!(out, "{text}")?,
        }
        out.flush()
    };
    emit(&mut out, &banner, true)?;
    for line in std::io::stdin().lock().lines() {
        let (answer, ended) = respond(&line?);
        emit(&mut out, answer, !ended)?;
        if ended {
            break;
        }
    }
    Ok(())
}
