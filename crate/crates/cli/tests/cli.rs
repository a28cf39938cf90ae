use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn jabber() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jabber"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    jabber().args(args).stdin(Stdio::null()).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SAMPLE: &str = "The committee approved the proposal on Tuesday, and 12 members voted against it.\n";

#[test]
fn fraction_zero_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "in.txt", SAMPLE);
    let o = run(&["jabberwockify", input.to_str().unwrap(), "--fraction", "0"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), SAMPLE);
}

#[test]
fn pin_on_reddit_fixture_resolves_the_location() {
    let input = fixture("reddit_jabberwocky.txt");
    let original = std::fs::read_to_string(&input).unwrap();
    let o = run(&[
        "jabberwockify",
        input.to_str().unwrap(),
        "--fraction",
        "0",
        "--pin",
        "Splud=Netherlands",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), original.replace("Splud", "Netherlands"));
    assert!(stdout(&o).contains("sprebb in the Netherlands?"));

    let o = run(&[
        "pin",
        input.to_str().unwrap(),
        "--pin",
        "in the Splud=in the Netherlands",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), original.replace("Splud", "Netherlands"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("1 match"));
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "in.txt", SAMPLE);
    let mut outs = Vec::new();
    for i in 0..2 {
        let out_dir = dir.path().join(format!("out{i}"));
        let o = run(&[
            "jabberwockify",
            input.to_str().unwrap(),
            "--seed",
            "42",
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        outs.push((
            std::fs::read(out_dir.join("in.jabber.txt")).unwrap(),
            std::fs::read(out_dir.join("in.stemmap.tsv")).unwrap(),
        ));
    }
    assert_eq!(outs[0], outs[1]);
    assert_ne!(outs[0].0, SAMPLE.as_bytes());

    let other = run(&["jabberwockify", input.to_str().unwrap(), "--seed", "43"]);
    assert_ne!(other.stdout, outs[0].0);
}

#[test]
fn jabberwockify_then_invert() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "in.txt", SAMPLE);
    let map = dir.path().join("map.tsv");
    let o = run(&["jabberwockify", input.to_str().unwrap(), "--map", map.to_str().unwrap()]);
    assert!(o.status.success());
    let jabber = write(dir.path(), "j.txt", &stdout(&o));
    let residue = dir.path().join("residue.json");
    let o = run(&[
        "invert",
        jabber.to_str().unwrap(),
        "--map",
        map.to_str().unwrap(),
        "--residue",
        residue.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), SAMPLE);
    assert_eq!(std::fs::read_to_string(residue).unwrap().trim(), "[]");
}

#[test]
fn per_corpus_scope_writes_one_map() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.txt", "The river flooded the valley.\n");
    let b = write(dir.path(), "b.txt", "A river crossed the valley.\n");
    let out = dir.path().join("out");
    let o = run(&[
        "jabberwockify",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--scope",
        "per-corpus",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(out.join("stemmap.tsv").exists());
    assert!(!out.join("a.stemmap.tsv").exists());
    let ja = std::fs::read_to_string(out.join("a.jabber.txt")).unwrap();
    let jb = std::fs::read_to_string(out.join("b.jabber.txt")).unwrap();
    // "river" and "valley" get the same pseudoword in both files.
    let wa: Vec<&str> = ja.split_whitespace().collect();
    let wb: Vec<&str> = jb.split_whitespace().collect();
    assert_eq!(wa[1], wb[1]);
    assert_eq!(wa[4], wb[4]);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.txt", "x\n");
    let o = run(&["jabberwockify", a.to_str().unwrap(), a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["jabberwockify", "/nonexistent/file.txt"]).status.code(), Some(2));
    assert_eq!(
        run(&["jabberwockify", a.to_str().unwrap(), "--fraction", "1.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["jabberwockify", a.to_str().unwrap(), "--scope", "global"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let bad = write(dir.path(), "bad.toml", "[transform]\nshade = 3\n");
    assert_eq!(
        run(&["--config", bad.to_str().unwrap(), "jabberwockify", a.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let latin1 = dir.path().join("latin1.txt");
    std::fs::write(&latin1, b"caf\xe9\n").unwrap();
    assert_eq!(run(&["mask", latin1.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn mask_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.txt", "");
    let o = run(&["mask", empty.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "");

    let digits = write(dir.path(), "d.txt", "In 1984 it rained.\n");
    assert_eq!(
        stdout(&run(&["mask", digits.to_str().unwrap()])),
        "In 1984 it BLANKed.\n"
    );
    assert_eq!(
        stdout(&run(&["mask", digits.to_str().unwrap(), "--mask-digits"])),
        "In BLANK it BLANKed.\n"
    );
}

#[test]
fn missing_credential_fails_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    write(&corpus, "a.txt", SAMPLE);
    let config = write(
        dir.path(),
        "c.toml",
        "[[eval.translators]]\nkind = \"http\"\nurl = \"http://127.0.0.1:9/v1/chat/completions\"\nmodel = \"m\"\napi_key_env = \"JABBER_TEST_UNSET_KEY\"\n",
    );
    let out = dir.path().join("out");
    let o = jabber()
        .args([
            "--config",
            config.to_str().unwrap(),
            "eval",
            corpus.to_str().unwrap(),
            "--out",
        ])
        .arg(&out)
        .env_remove("JABBER_TEST_UNSET_KEY")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("JABBER_TEST_UNSET_KEY"));
    assert!(!out.exists());
}

#[test]
fn unreachable_endpoint_exits_4_and_keeps_records() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    write(&corpus, "a.txt", SAMPLE);
    let config = write(
        dir.path(),
        "c.toml",
        "[[eval.translators]]\nkind = \"http\"\nurl = \"http://127.0.0.1:9/v1/chat/completions\"\nmodel = \"m\"\nmax_attempts = 1\ntimeout_secs = 2\n",
    );
    let out = dir.path().join("out");
    let o = run(&[
        "--config",
        config.to_str().unwrap(),
        "eval",
        corpus.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    let records = std::fs::read_to_string(out.join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 1);
    assert!(records.contains("\"stage\":\"translate\""));
}

fn stub_eval_setup(dir: &Path) -> (PathBuf, PathBuf) {
    let corpus = dir.join("corpus");
    std::fs::create_dir(&corpus).unwrap();
    for (i, text) in [
        "The river flooded the valley.",
        "Federal courts barred the state.",
        SAMPLE,
    ]
    .iter()
    .enumerate()
    {
        write(&corpus, &format!("p{i}.txt"), text);
    }
    let config = write(
        dir,
        "c.toml",
        "seed = 5\n[[eval.translators]]\nkind = \"echo-original\"\n",
    );
    (corpus, config)
}

#[test]
fn stub_eval_scores_one_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, config) = stub_eval_setup(dir.path());
    let out = dir.path().join("out");
    let args = [
        "--config",
        config.to_str().unwrap(),
        "eval",
        corpus.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let records = jabber_harness::records::read_records(&out.join("records.jsonl")).unwrap();
    assert_eq!(records.len(), 3);
    for r in &records {
        assert!((r.similarity.unwrap() - 1.0).abs() <= 1e-6);
    }
    for f in ["summary.csv", "report.svg", "report.json", "report.txt"] {
        assert!(out.join("report").join(f).exists(), "{f}");
    }

    // Without --resume an existing run is left alone.
    assert_eq!(run(&args).status.code(), Some(2));

    let mut resumed = args.to_vec();
    resumed.push("--resume");
    assert!(run(&resumed).status.success());
    let again = jabber_harness::records::read_records(&out.join("records.jsonl")).unwrap();
    assert_eq!(again.len(), 3);
}

#[test]
fn stub_game_play_and_elicit() {
    let dir = tempfile::tempdir().unwrap();
    let script = write(
        dir.path(),
        "script.txt",
        "SITUATION: new\nTHOUGHT: look first\nCOMMAND: look\n---\nSITUATION: glauds\nTHOUGHT: try\nCOMMAND: distim gitch\n---\ndistim: to activate something\n",
    );
    let transcript = dir.path().join("t.jsonl");
    let defs = dir.path().join("defs.json");
    let o = run(&[
        "play",
        "--turns",
        "2",
        "--scripted",
        script.to_str().unwrap(),
        "--logical-clock",
        "--transcript",
        transcript.to_str().unwrap(),
        "--elicit",
        "distim",
        "--elicit-json",
        defs.to_str().unwrap(),
        "--",
        env!("CARGO_BIN_EXE_jabber"),
        "stub-game",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("COMMAND: distim gitch"));
    assert!(out.contains("Word    Definition\ndistim  to activate something\n"));
    assert_eq!(std::fs::read_to_string(&transcript).unwrap().lines().count(), 2);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(defs).unwrap()).unwrap();
    assert_eq!(json["definitions"][0]["word"], "distim");
}

#[test]
fn play_errors() {
    let dir = tempfile::tempdir().unwrap();
    let script = write(dir.path(), "s.txt", "SITUATION: a\nTHOUGHT: b\nCOMMAND: look\n");
    let o = run(&[
        "play",
        "--scripted",
        script.to_str().unwrap(),
        "--",
        "/nonexistent/game/binary",
    ]);
    assert_eq!(o.status.code(), Some(2));
    // No model configured at all.
    let o = run(&["play", "--", env!("CARGO_BIN_EXE_jabber"), "stub-game"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn genwords_output() {
    let o = run(&["genwords", "0"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "");

    let a = stdout(&run(&["genwords", "50", "--seed", "9"]));
    let b = stdout(&run(&["genwords", "50", "--seed", "9"]));
    assert_eq!(a, b);
    let lexicon: HashSet<&str> = jabber_core::english::lexicon()
        .entries()
        .iter()
        .map(|(w, _)| w.as_str())
        .collect();
    let words: Vec<&str> = a.lines().collect();
    assert_eq!(words.len(), 50);
    for w in words {
        assert!((4..=8).contains(&w.chars().count()), "{w}");
        assert!(!lexicon.contains(w), "{w}");
    }
    assert_eq!(
        run(&["genwords", "3", "--min-len", "6", "--max-len", "5"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn default_blank_template_builds_the_masked_prompt() {
    let masked = stdout(&run(&["mask", fixture("legal_original.txt").to_str().unwrap()]));
    let prompt = jabber_harness::prompt::PromptTemplate::blank().build(&masked);
    assert!(prompt.starts_with(
        "In this passage, content words have been replaced with the word BLANK. Translate the passage as best as you can into standard English. The final response should have all English words and retain consistency with the original text.\n\nIn the BLANK BLANK, BLANK BLANK has BLANK"
    ));
    assert!(prompt.ends_with("from BLANKing this BLANK.\n"));
}

#[test]
fn runbook_comparison_matches_labels() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("reddit");
    std::fs::create_dir(&corpus).unwrap();
    std::fs::copy(fixture("reddit_original.txt"), corpus.join("reddit.txt")).unwrap();
    std::fs::copy(fixture("reddit_jabberwocky.txt"), corpus.join("reddit.jabber.txt")).unwrap();
    write(
        &corpus,
        "corpus.toml",
        r#"
[[passage]]
id = "reddit-unpinned"
file = "reddit.txt"
transformed_file = "reddit.jabber.txt"
label = "unpinned"

[[passage]]
id = "reddit-pinned"
file = "reddit.txt"
transformed_file = "reddit.jabber.txt"
label = "pinned"
pins = ["Splud=Netherlands"]
"#,
    );
    let config = write(
        dir.path(),
        "c.toml",
        "[eval]\ncomparisons = [{ name = \"location pin\", higher = \"pinned\", lower = \"unpinned\" }]\n[[eval.translators]]\nkind = \"echo-prompt\"\n",
    );
    let out = dir.path().join("out");
    let o = run(&[
        "--config",
        config.to_str().unwrap(),
        "eval",
        corpus.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("comparison location pin"), "{text}");
    // Echoing the prompt scores by overlap with the original, so the pin
    // can only help here.
    assert!(text.contains("-> holds"), "{text}");
}
