mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use jabber_core::{Pin, Scope};

/// Nonsense-word transforms of English text, masking, translation-recovery
/// evaluation, and an LLM game-playing loop.
///
/// Exit codes: 0 success, 2 usage or input error, 3 pseudoword generation
/// exhausted, 4 remote service error.
#[derive(Parser)]
#[command(name = "jabber", version)]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Log requests, responses and progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct TransformFlags {
    /// Random seed; all randomness derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Share of content-word types to replace, in [0, 1].
    #[arg(long)]
    fraction: Option<f64>,
    /// Force SOURCE (word or phrase) to become REPLACEMENT. Repeatable.
    #[arg(long = "pin", value_name = "SOURCE=REPLACEMENT")]
    pins: Vec<Pin>,
    /// Whether stem mappings are shared across input files.
    #[arg(long, value_parser = parse_scope)]
    scope: Option<Scope>,
}

fn parse_scope(s: &str) -> Result<Scope, String> {
    s.parse().map_err(|e: jabber_core::Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Replace content words with generated nonsense words.
    ///
    /// With one input and no --out-dir the text goes to stdout. With
    /// --out-dir each INPUT produces <stem>.jabber.txt and a stem map
    /// (<stem>.stemmap.tsv, or stemmap.tsv for --scope per-corpus).
    Jabberwockify {
        /// Input files; "-" reads stdin.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        /// Where to write the stem map when printing to stdout.
        #[arg(long, value_name = "FILE")]
        map: Option<PathBuf>,
        /// Start from an existing stem map.
        #[arg(long, value_name = "FILE")]
        map_in: Option<PathBuf>,
        #[command(flatten)]
        flags: TransformFlags,
    },
    /// Replace content words with BLANK, keeping inflections.
    Mask {
        input: PathBuf,
        /// Output file; stdout if omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Share of content-word types to mask.
        #[arg(long)]
        fraction: Option<f64>,
        /// Mask digits too.
        #[arg(long)]
        mask_digits: bool,
    },
    /// Substitute words or phrases on token boundaries.
    Pin {
        input: PathBuf,
        #[arg(long = "pin", value_name = "SOURCE=REPLACEMENT", required = true)]
        pins: Vec<Pin>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Map nonsense words back to the originals using a stem map.
    Invert {
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        map: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Write words the map could not account for as JSON.
        #[arg(long, value_name = "FILE")]
        residue: Option<PathBuf>,
    },
    /// Transform a corpus, collect translations and score them.
    ///
    /// Writes OUT/records.jsonl and OUT/report/. Endpoints come from the
    /// [eval] section of the config file.
    Eval {
        corpus_dir: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Continue an earlier run, skipping requests already scored.
        #[arg(long)]
        resume: bool,
        #[command(flatten)]
        flags: TransformFlags,
    },
    /// Let a chat model play a text game given after "--".
    Play {
        /// Turn limit.
        #[arg(long)]
        turns: Option<usize>,
        /// JSON Lines transcript output.
        #[arg(long, value_name = "FILE")]
        transcript: Option<PathBuf>,
        /// After playing, ask for definitions of these words (none: the
        /// model picks).
        #[arg(long, num_args = 0.., value_name = "WORD")]
        elicit: Option<Vec<String>>,
        /// Where to write the definitions as JSON; stdout if omitted.
        #[arg(long, value_name = "FILE")]
        elicit_json: Option<PathBuf>,
        /// Replay canned model replies from FILE, separated by "---" lines.
        #[arg(long, value_name = "FILE")]
        scripted: Option<PathBuf>,
        /// Stamp transcript lines with a counter instead of wall time.
        #[arg(long)]
        logical_clock: bool,
        /// Interpreter command line.
        #[arg(last = true, required = true)]
        game: Vec<String>,
    },
    /// Print N generated pseudowords.
    Genwords {
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 4)]
        min_len: usize,
        #[arg(long, default_value_t = 8)]
        max_len: usize,
    },
    /// Built-in test game.
    #[command(hide = true)]
    StubGame {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        args: Vec<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Command::StubGame { args } = &cli.command {
        if let Err(e) = jabber_harness::stubgame::run(args.clone()) {
            eprintln!("stub-game: {e}");
            std::process::exit(2);
        }
        return;
    }
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(if cli.verbose {
            tracing_subscriber::filter::LevelFilter::DEBUG
        } else {
            tracing_subscriber::filter::LevelFilter::WARN
        })
        .init();
    let code = match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", commands::describe(&e));
            commands::exit_code(&e)
        }
    };
    std::process::exit(code);
}
