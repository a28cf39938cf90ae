use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use jabber_core::{english, Mode, TransformConfig};
use jabber_harness::corpus::{load_corpus, run_corpus, EvalPlan, Passage};
use jabber_harness::endpoint::{EchoOriginal, EchoPrompt, HashEmbedder, Translator};
use jabber_harness::records::{read_records, RecordWriter, Stage};
use jabber_harness::report::{summarize, Comparison};
use jabber_harness::{Error, RemoteError, RemoteErrorKind};

const SENTENCES: &[&str] = &[
    "The old lighthouse keeper climbed the stairs every evening.",
    "Rain had flooded the lower fields by the time the farmers arrived.",
    "She folded the letter twice and hid it inside a cookbook.",
    "Our neighbours were painting their fence a startling shade of green.",
    "The committee postponed its decision until the spring meeting.",
    "A small dog was barking at the delivery van across the street.",
];

fn passages(n: usize) -> Vec<Passage> {
    (0..n)
        .map(|i| {
            let text = (0..4)
                .map(|k| SENTENCES[(i + k) % SENTENCES.len()])
                .collect::<Vec<_>>()
                .join(" ");
            Passage::new(format!("p{i:02}"), format!("{text} Passage number {i}."))
        })
        .collect()
}

fn plan(mode: Mode, translators: Vec<Arc<dyn Translator>>, limit: usize) -> EvalPlan {
    EvalPlan {
        transform: TransformConfig {
            mode,
            ..TransformConfig::jabberwocky(7)
        },
        templates: Vec::new(),
        translators,
        embedder: Arc::new(HashEmbedder::new(256).unwrap()),
        concurrency_limit: limit,
        fws: Arc::new(english::function_words().clone()),
        generator: english::generator(),
    }
}

#[tokio::test]
async fn echo_original_scores_one_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.jsonl");
    let corpus = passages(8);
    let plan = plan(Mode::Jabberwocky, vec![Arc::new(EchoOriginal)], 4);
    let mut w = RecordWriter::create(&path).unwrap();
    let out = run_corpus(&corpus, &plan, &mut w, Vec::new()).await.unwrap();
    assert_eq!(out.written, 8);
    assert_eq!(out.failed, 0);
    let records = read_records(&path).unwrap();
    assert_eq!(records.len(), 8);
    for r in &records {
        assert!((r.similarity.unwrap() - 1.0).abs() <= 1e-6, "{}", r.passage_id);
        assert!(r.is_consistent());
        assert_ne!(r.transformed_text, r.original_text);
        assert_eq!(r.seed, 7);
        assert_eq!(r.config_hash, plan.config_hash());
        assert!(r.prompt.ends_with(&r.transformed_text));
    }
    let report = summarize(&records, &[]).unwrap();
    assert_eq!(report.conditions.len(), 1);
    assert_eq!(report.conditions[0].histogram[19], 8);
}

#[tokio::test]
async fn interrupted_run_resumes_without_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.jsonl");
    let corpus = passages(10);
    let plan = plan(Mode::Blank, vec![Arc::new(EchoOriginal), Arc::new(EchoPrompt)], 3);
    let mut w = RecordWriter::create(&path).unwrap();
    run_corpus(&corpus, &plan, &mut w, Vec::new()).await.unwrap();
    drop(w);

    // Keep three complete records and half of the fourth.
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let mut cut = lines[..3].join("\n");
    cut.push('\n');
    cut.push_str(&lines[3][..lines[3].len() / 2]);
    std::fs::write(&path, cut).unwrap();

    let (mut w, existing) = RecordWriter::resume(&path).unwrap();
    assert_eq!(existing.len(), 3);
    let out = run_corpus(&corpus, &plan, &mut w, existing).await.unwrap();
    assert_eq!(out.skipped, 3);
    assert_eq!(out.written, 17);

    let records = read_records(&path).unwrap();
    assert_eq!(records.len(), 20);
    let keys: HashSet<_> = records.iter().map(|r| r.cache_key.as_str()).collect();
    assert_eq!(keys.len(), 20);

    // A second resume has nothing left to do.
    let (mut w, existing) = RecordWriter::resume(&path).unwrap();
    let out = run_corpus(&corpus, &plan, &mut w, existing).await.unwrap();
    assert_eq!((out.written, out.skipped), (0, 20));
}

struct Slow {
    in_flight: AtomicUsize,
    peak: AtomicUsize,
}

#[async_trait]
impl Translator for Slow {
    fn model_id(&self) -> &str {
        "slow"
    }

    async fn translate(&self, _prompt: &str, original: &str) -> Result<String, RemoteError> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        tokio::time::sleep(Duration::from_millis(20)).await;
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        if original.contains("number 3.") {
            return Err(RemoteError::new(RemoteErrorKind::Timeout, "slow", "gave up"));
        }
        Ok(original.to_string())
    }
}

#[tokio::test]
async fn concurrency_is_bounded_and_failures_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.jsonl");
    let slow = Arc::new(Slow {
        in_flight: AtomicUsize::new(0),
        peak: AtomicUsize::new(0),
    });
    let plan = plan(Mode::Blank, vec![slow.clone()], 3);
    let mut w = RecordWriter::create(&path).unwrap();
    let out = run_corpus(&passages(12), &plan, &mut w, Vec::new()).await.unwrap();
    let peak = slow.peak.load(Ordering::SeqCst);
    assert!((2..=3).contains(&peak), "peak {peak}");
    assert_eq!(out.failed, 1);

    let records = read_records(&path).unwrap();
    let failed: Vec<_> = records.iter().filter(|r| !r.is_scored()).collect();
    assert_eq!(failed.len(), 1);
    let err = failed[0].error.as_ref().unwrap();
    assert_eq!((err.stage, err.kind.as_str()), (Stage::Translate, "timeout"));
    assert!(failed[0].translation.is_none());

    let report = summarize(&records, &[]).unwrap();
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.conditions[0].count, 11);
}

#[tokio::test]
async fn unscorable_translation_is_kept_aside() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.jsonl");
    let plan = plan(Mode::Blank, vec![Arc::new(EchoOriginal)], 1);
    let mut w = RecordWriter::create(&path).unwrap();
    run_corpus(&[Passage::new("dots", "... !!! ...")], &plan, &mut w, Vec::new())
        .await
        .unwrap();
    let r = &read_records(&path).unwrap()[0];
    assert!(r.translation.is_none() && r.similarity.is_none());
    let err = r.error.as_ref().unwrap();
    assert_eq!(err.stage, Stage::Score);
    assert_eq!(err.unscored_translation.as_deref(), Some("... !!! ..."));
    assert!(matches!(
        summarize(std::slice::from_ref(r), &[]),
        Err(Error::EmptyReport)
    ));
}

#[tokio::test]
async fn manifest_passages_and_labelled_markers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("orig.txt"), "Is bacon eaten raw in the Netherlands?").unwrap();
    std::fs::write(d.join("jab.txt"), "Is psive veich sprebb in the Splud?").unwrap();
    std::fs::write(
        d.join("corpus.toml"),
        r#"
[[passage]]
id = "unpinned"
file = "orig.txt"
transformed_file = "jab.txt"
label = "unpinned"

[[passage]]
id = "pinned"
file = "orig.txt"
transformed_file = "jab.txt"
pins = ["Splud=Netherlands"]
label = "pinned"
"#,
    )
    .unwrap();
    let corpus = load_corpus(d).unwrap();
    assert_eq!(corpus.len(), 2);
    assert_eq!(corpus[1].pins.len(), 1);

    // Echoing the prompt back scores by word overlap with the original, so
    // the pinned passage scores higher.
    let plan = plan(Mode::Jabberwocky, vec![Arc::new(EchoPrompt)], 2);
    let path = d.join("records.jsonl");
    let mut w = RecordWriter::create(&path).unwrap();
    run_corpus(&corpus, &plan, &mut w, Vec::new()).await.unwrap();
    let records = read_records(&path).unwrap();
    let pinned = records.iter().find(|r| r.passage_id == "pinned").unwrap();
    assert_eq!(pinned.transformed_text, "Is psive veich sprebb in the Netherlands?");

    let cmp = Comparison {
        name: "pinning".into(),
        higher: "pinned".into(),
        lower: "unpinned".into(),
    };
    let report = summarize(&records, &[cmp]).unwrap();
    assert_eq!(report.markers.len(), 2);
    assert_eq!(report.comparisons.len(), 1);
    assert!(report.comparisons[0].holds);

    let files = report.write_dir(&d.join("report")).unwrap();
    assert!(files.iter().any(|f| f.ends_with("summary.csv")));
    let svg = std::fs::read_to_string(d.join("report/report.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("pinned ("));
}

#[test]
fn plain_directory_corpus() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_corpus(dir.path()), Err(Error::Input(_))));
    std::fs::write(dir.path().join("b.txt"), "Second.").unwrap();
    std::fs::write(dir.path().join("a.txt"), "First.").unwrap();
    std::fs::write(dir.path().join("notes.md"), "ignored").unwrap();
    let corpus = load_corpus(dir.path()).unwrap();
    let ids: Vec<_> = corpus.iter().map(|p| p.id.as_str()).collect();
    assert_eq!(ids, ["a", "b"]);
}
