use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use jabber_core::pseudogen::seeded_rng;
use jabber_core::{invert, mask, pin, Jabberwockifier, LengthSpec, Mode, Scope, StemMap, TransformConfig};
use jabber_harness::agent::{
    elicit_lexicon, play, render_table, Clock, GameSession, LogicalClock, PlayConfig, PlayEnd, SystemClock,
    TranscriptWriter,
};
use jabber_harness::corpus::{load_corpus, run_corpus, EvalPlan};
use jabber_harness::endpoint::{build_embedder, build_translator, ChatModel, HttpChat, ScriptedChat};
use jabber_harness::records::{RecordWriter, Stage};
use jabber_harness::report::summarize;

use crate::config::{self, Loaded};
use crate::{Cli, Command, TransformFlags};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_GENERATION: i32 = 3;
pub const EXIT_REMOTE: i32 = 4;

pub fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if let Some(jabber_core::Error::Exhausted { .. }) = cause.downcast_ref::<jabber_core::Error>() {
            return EXIT_GENERATION;
        }
        match cause.downcast_ref::<jabber_harness::Error>() {
            Some(jabber_harness::Error::Remote(_)) => return EXIT_REMOTE,
            Some(jabber_harness::Error::Transform(jabber_core::Error::Exhausted { .. })) => return EXIT_GENERATION,
            _ => {}
        }
        if cause.downcast_ref::<jabber_harness::RemoteError>().is_some() {
            return EXIT_REMOTE;
        }
    }
    EXIT_INPUT
}

/// The error chain on one line, leaving out causes whose text the
/// enclosing message already includes.
pub fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
        return Ok(s);
    }
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn transform_config(loaded: &Loaded, flags: &TransformFlags, mode: Mode) -> Result<TransformConfig> {
    let mut cfg = loaded.transform(flags.seed, flags.fraction, flags.scope, &flags.pins)?;
    cfg.mode = mode;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<i32> {
    let loaded = config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Jabberwockify {
            inputs,
            out_dir,
            map,
            map_in,
            flags,
        } => jabberwockify(
            &loaded,
            &inputs,
            out_dir.as_deref(),
            map.as_deref(),
            map_in.as_deref(),
            &flags,
        ),
        Command::Mask {
            input,
            output,
            fraction,
            mask_digits,
        } => {
            let mut cfg = loaded.transform(None, fraction, None, &[])?;
            cfg.mode = Mode::Blank;
            cfg.retain_digits &= !mask_digits;
            let text = read_input(&input)?;
            write_output(output.as_deref(), &mask(&text, &cfg, &loaded.fws)?)?;
            Ok(0)
        }
        Command::Pin { input, pins, output } => {
            let text = read_input(&input)?;
            let result = pin(&text, &pins, None)?;
            write_output(output.as_deref(), &result.text)?;
            for o in &result.outcomes {
                eprintln!("pin {:?} -> {:?}: {} match(es)", o.source, o.replacement, o.count);
            }
            Ok(0)
        }
        Command::Invert {
            input,
            map,
            output,
            residue,
        } => {
            let map = StemMap::from_tsv(&read_input(&map)?)?;
            let inv = invert(&read_input(&input)?, &map, &loaded.fws)?;
            write_output(output.as_deref(), &inv.text)?;
            match residue {
                Some(p) => std::fs::write(&p, serde_json::to_string_pretty(&inv.residue)? + "\n")
                    .with_context(|| format!("cannot write {}", p.display()))?,
                None if !inv.residue.is_empty() => {
                    eprintln!(
                        "{} word(s) not covered by the map were kept as they are",
                        inv.residue.len()
                    )
                }
                None => {}
            }
            Ok(0)
        }
        Command::Eval {
            corpus_dir,
            out,
            resume,
            flags,
        } => eval(&loaded, &corpus_dir, &out, resume, &flags),
        Command::Play {
            turns,
            transcript,
            elicit,
            elicit_json,
            scripted,
            logical_clock,
            game,
        } => play_game(
            &loaded,
            PlayArgs {
                turns,
                transcript,
                elicit,
                elicit_json,
                scripted,
                logical_clock,
                game,
            },
        ),
        Command::Genwords {
            n,
            seed,
            min_len,
            max_len,
        } => {
            if min_len == 0 || min_len > max_len {
                bail!("need 1 <= --min-len <= --max-len");
            }
            let mut rng = seeded_rng(seed.or(loaded.config.seed).unwrap_or(0));
            let words = loaded.generator.batch(
                n,
                LengthSpec {
                    min: min_len,
                    max: max_len,
                },
                &mut rng,
            )?;
            let mut out = String::new();
            for w in words {
                out.push_str(&w);
                out.push('\n');
            }
            write_output(None, &out)?;
            Ok(0)
        }
        Command::StubGame { .. } => unreachable!("handled before config loading"),
    }
}

fn file_stem(path: &Path) -> String {
    if path == Path::new("-") {
        return "stdin".into();
    }
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".into())
}

fn jabberwockify(
    loaded: &Loaded,
    inputs: &[PathBuf],
    out_dir: Option<&Path>,
    map_out: Option<&Path>,
    map_in: Option<&Path>,
    flags: &TransformFlags,
) -> Result<i32> {
    let cfg = transform_config(loaded, flags, Mode::Jabberwocky)?;
    let scope = cfg.scope;
    let map = match map_in {
        Some(p) => StemMap::from_tsv(&read_input(p)?)?,
        None => StemMap::new(cfg.seed, scope),
    };
    let mut engine = Jabberwockifier::with_map(loaded.fws.clone(), loaded.generator.clone(), cfg, map)?;
    let report = |name: &str, warnings: &[String]| {
        for w in warnings {
            eprintln!("warning: {name}: {w}");
        }
    };
    let Some(dir) = out_dir else {
        let [input] = inputs else {
            bail!("several inputs need --out-dir");
        };
        let out = engine.transform(&read_input(input)?)?;
        report(&input.display().to_string(), &out.report.warnings);
        write_output(None, &out.text)?;
        if let Some(p) = map_out {
            std::fs::write(p, engine.map().to_tsv()).with_context(|| format!("cannot write {}", p.display()))?;
        }
        return Ok(0);
    };
    if map_out.is_some() {
        bail!("--map is for stdout mode; with --out-dir maps are written next to the outputs");
    }
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut seen = HashSet::new();
    for input in inputs {
        let stem = file_stem(input);
        if !seen.insert(stem.clone()) {
            bail!("two inputs share the name {stem:?}");
        }
        let out = engine.transform(&read_input(input)?)?;
        report(&input.display().to_string(), &out.report.warnings);
        std::fs::write(dir.join(format!("{stem}.jabber.txt")), &out.text)?;
        if scope == Scope::PerDocument {
            std::fs::write(dir.join(format!("{stem}.stemmap.tsv")), engine.map().to_tsv())?;
        }
    }
    if scope == Scope::PerCorpus {
        std::fs::write(dir.join("stemmap.tsv"), engine.map().to_tsv())?;
    }
    Ok(0)
}

fn eval(loaded: &Loaded, corpus_dir: &Path, out: &Path, resume: bool, flags: &TransformFlags) -> Result<i32> {
    let e = &loaded.config.eval;
    // Endpoints are built first so that missing credentials stop the run
    // before any work is done.
    let translators = e
        .translators
        .iter()
        .map(build_translator)
        .collect::<Result<Vec<_>, _>>()?;
    if translators.is_empty() {
        bail!(jabber_harness::Error::Config(
            "no translators configured under [eval]".into()
        ));
    }
    let embedder = build_embedder(&e.embedder.clone().unwrap_or_default())?;
    let mode = loaded.config.transform.mode.unwrap_or(Mode::Jabberwocky);
    let transform = transform_config(loaded, flags, mode)?;
    let passages = load_corpus(corpus_dir)?;

    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let records_path = out.join("records.jsonl");
    let (mut writer, existing) = if resume {
        RecordWriter::resume(&records_path)?
    } else if records_path.exists() {
        bail!("{} exists; pass --resume to continue it", records_path.display());
    } else {
        (RecordWriter::create(&records_path)?, Vec::new())
    };
    let plan = EvalPlan {
        transform,
        templates: loaded.templates.clone(),
        translators,
        embedder,
        concurrency_limit: e.concurrency_limit.unwrap_or(4),
        fws: loaded.fws.clone(),
        generator: loaded.generator.clone(),
    };
    let outcome = runtime()?.block_on(run_corpus(&passages, &plan, &mut writer, existing))?;
    eprintln!(
        "{} record(s) written, {} skipped as already done, {} failed",
        outcome.written, outcome.skipped, outcome.failed
    );
    match summarize(&outcome.records, &e.comparisons) {
        Ok(report) => {
            report.write_dir(&out.join("report"))?;
            write_output(None, &report.text())?;
        }
        Err(jabber_harness::Error::EmptyReport) => eprintln!("no scored records; report not written"),
        Err(err) => return Err(err.into()),
    }
    let new = &outcome.records[outcome.records.len() - outcome.written..];
    let stages: HashSet<Stage> = new.iter().filter_map(|r| r.error.as_ref().map(|e| e.stage)).collect();
    Ok(
        if stages.contains(&Stage::Translate) || stages.contains(&Stage::Embed) || stages.contains(&Stage::Score) {
            EXIT_REMOTE
        } else if stages.contains(&Stage::Transform) {
            EXIT_GENERATION
        } else {
            0
        },
    )
}

struct PlayArgs {
    turns: Option<usize>,
    transcript: Option<PathBuf>,
    elicit: Option<Vec<String>>,
    elicit_json: Option<PathBuf>,
    scripted: Option<PathBuf>,
    logical_clock: bool,
    game: Vec<String>,
}

fn play_game(loaded: &Loaded, args: PlayArgs) -> Result<i32> {
    let p = &loaded.config.play;
    let llm: Box<dyn ChatModel> = match (&args.scripted, &p.llm) {
        (Some(path), _) => Box::new(ScriptedChat::from_script(&read_input(path)?)),
        (None, Some(cfg)) => Box::new(HttpChat::new(cfg.clone())?),
        (None, None) => bail!(jabber_harness::Error::Config(
            "no model: pass --scripted FILE or configure [play.llm]".into()
        )),
    };
    let clock: Arc<dyn Clock> = if args.logical_clock {
        Arc::new(LogicalClock::default())
    } else {
        Arc::new(SystemClock)
    };
    let config = PlayConfig {
        max_turns: args.turns.or(p.max_turns).unwrap_or(20),
        context_turns: p.context_turns.unwrap_or(10),
        system_prompt: loaded.system_prompt.clone(),
    };
    let mut writer = args.transcript.as_deref().map(TranscriptWriter::create).transpose()?;

    runtime()?
        .block_on(async {
            let mut session = GameSession::spawn(&args.game, loaded.session(), clock.clone())
                .await
                .map_err(jabber_harness::Error::from)?;
            let result = play(&mut session, llm.as_ref(), &config, clock.as_ref(), writer.as_mut()).await;
            session.close().await;
            let transcript = result?;
            write_output(None, &format!("{}\n", transcript.text()))?;
            for a in &transcript.aborted {
                eprintln!("warning: turn {} forfeited: {}", a.turn_index, a.error);
            }
            let code = match &transcript.end {
                PlayEnd::TurnLimit | PlayEnd::GameEnded => 0,
                PlayEnd::ModelFailed(m) => {
                    eprintln!("error: model call failed: {m}");
                    return Ok(EXIT_REMOTE);
                }
                PlayEnd::GameFailed(m) => {
                    eprintln!("error: game: {m}");
                    return Ok(EXIT_INPUT);
                }
            };
            if let Some(words) = &args.elicit {
                let elicited = elicit_lexicon(llm.as_ref(), &transcript.text(), words).await?;
                for w in &elicited.warnings {
                    eprintln!("warning: {w}");
                }
                let json = serde_json::to_string_pretty(&elicited)? + "\n";
                write_output(None, &render_table(&elicited.definitions))?;
                match &args.elicit_json {
                    Some(path) => {
                        std::fs::write(path, json).with_context(|| format!("cannot write {}", path.display()))?
                    }
                    None => write_output(None, &json)?,
                }
            }
            Ok::<i32, anyhow::Error>(code)
        })
        .map_err(|e| anyhow!(e))
}
