//! Corpus loading and the transform → prompt → translate → embed → score
//! pipeline.

use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use chrono::Utc;
use futures::stream::{self, StreamExt};
use jabber_core::{mask, pin, FunctionWordSet, Jabberwockifier, Mode, Pin, PseudowordGenerator, TransformConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::sync::OnceCell;

use crate::endpoint::{Embedder, Translator};
use crate::error::{Error, RemoteError, Result};
use crate::prompt::PromptTemplate;
use crate::records::{cache_key, hex, Counts, RecordError, RecordWriter, RunRecord, Stage, RECORD_VERSION};
use crate::scoring::{cosine, EmbeddingVector};

pub const MANIFEST: &str = "corpus.toml";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub text: String,
    /// Shown as a marker in reports.
    pub label: Option<String>,
    /// Used instead of running the transform.
    pub transformed: Option<String>,
    /// Applied after the transform.
    pub pins: Vec<Pin>,
}

impl Passage {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Passage {
            id: id.into(),
            text: text.into(),
            label: None,
            transformed: None,
            pins: Vec::new(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    passage: Vec<ManifestEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    id: Option<String>,
    file: String,
    transformed_file: Option<String>,
    label: Option<String>,
    #[serde(default)]
    pins: Vec<String>,
}

/// Loads passages from `dir`. With a `corpus.toml` manifest the listed
/// files are used in order; otherwise every `*.txt` file, sorted by name,
/// with the file stem as id.
pub fn load_corpus(dir: &Path) -> Result<Vec<Passage>> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(Error::io(format!("reading {}", p.display())));
    let manifest = dir.join(MANIFEST);
    let passages = if manifest.exists() {
        let m: Manifest =
            toml::from_str(&read(&manifest)?).map_err(|e| Error::Input(format!("{}: {e}", manifest.display())))?;
        m.passage
            .into_iter()
            .map(|e| {
                let path = dir.join(&e.file);
                let id = e.id.unwrap_or_else(|| stem(&path));
                Ok(Passage {
                    text: read(&path)?,
                    transformed: e.transformed_file.map(|f| read(&dir.join(f))).transpose()?,
                    pins: e.pins.iter().map(|p| p.parse()).collect::<Result<_, _>>()?,
                    label: e.label,
                    id,
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .map_err(Error::io(format!("listing {}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        files
            .iter()
            .map(|p| Ok(Passage::new(stem(p), read(p)?)))
            .collect::<Result<Vec<_>>>()?
    };
    if passages.is_empty() {
        return Err(Error::Input(format!("no passages in {}", dir.display())));
    }
    let mut seen = HashSet::new();
    for p in &passages {
        if !seen.insert(p.id.as_str()) {
            return Err(Error::Input(format!("duplicate passage id {:?}", p.id)));
        }
    }
    Ok(passages)
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub struct EvalPlan {
    pub transform: TransformConfig,
    /// Empty means the bundled template for the transform mode.
    pub templates: Vec<PromptTemplate>,
    pub translators: Vec<Arc<dyn Translator>>,
    pub embedder: Arc<dyn Embedder>,
    pub concurrency_limit: usize,
    pub fws: Arc<FunctionWordSet>,
    pub generator: PseudowordGenerator,
}

impl EvalPlan {
    fn templates(&self) -> Vec<PromptTemplate> {
        if self.templates.is_empty() {
            vec![PromptTemplate::default_for(self.transform.mode)]
        } else {
            self.templates.clone()
        }
    }

    /// Digest of everything that determines the requests of a run.
    pub fn config_hash(&self) -> String {
        let described = serde_json::json!({
            "transform": self.transform,
            "templates": self.templates(),
            "translators": self.translators.iter().map(|t| t.model_id()).collect::<Vec<_>>(),
            "embedder": self.embedder.model_id(),
        });
        hex(&Sha256::digest(described.to_string().as_bytes()))
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    /// Records found on resume followed by those written in this run.
    pub records: Vec<RunRecord>,
    pub written: usize,
    pub skipped: usize,
    pub failed: usize,
}

struct Prepared<'a> {
    index: usize,
    passage: &'a Passage,
    transformed: Result<String, String>,
}

/// Runs every passage through every template and translator. Records are
/// appended to `writer` as they complete; requests whose cache key already
/// has a scored record in `existing` are skipped.
pub async fn run_corpus(
    passages: &[Passage],
    plan: &EvalPlan,
    writer: &mut RecordWriter,
    existing: Vec<RunRecord>,
) -> Result<RunOutcome> {
    if passages.is_empty() {
        return Err(Error::Input("corpus is empty".into()));
    }
    if plan.translators.is_empty() {
        return Err(Error::Config("no translator configured".into()));
    }
    let limit = plan.concurrency_limit.max(1);
    let templates = plan.templates();
    let config_hash = plan.config_hash();
    let done: HashSet<String> = existing
        .iter()
        .filter(|r| r.is_scored())
        .map(|r| r.cache_key.clone())
        .collect();

    // Transforms run first and in corpus order, so a corpus-wide stem map
    // is filled deterministically.
    let mut engine = match plan.transform.mode {
        Mode::Jabberwocky => Some(Jabberwockifier::new(
            plan.fws.clone(),
            plan.generator.clone(),
            plan.transform.clone(),
        )?),
        Mode::Blank => None,
    };
    let prepared: Vec<Prepared> = passages
        .iter()
        .enumerate()
        .map(|(index, passage)| Prepared {
            index,
            passage,
            transformed: transform_passage(passage, plan, engine.as_mut()).map_err(|e| e.to_string()),
        })
        .collect();

    let originals: Vec<OnceCell<Result<EmbeddingVector, RemoteError>>> =
        passages.iter().map(|_| OnceCell::new()).collect();

    let mut jobs = Vec::new();
    let mut failed_early = Vec::new();
    let mut skipped = 0;
    for prep in &prepared {
        for template in &templates {
            for translator in &plan.translators {
                let transformed = match &prep.transformed {
                    Ok(t) => t,
                    Err(message) => {
                        let job = Job {
                            prep,
                            template,
                            translator: translator.clone(),
                            key: String::new(),
                        };
                        failed_early.push((job, message.clone()));
                        continue;
                    }
                };
                let key = cache_key(transformed, template.body(), translator.model_id());
                if done.contains(&key) {
                    skipped += 1;
                    continue;
                }
                jobs.push(Job {
                    prep,
                    template,
                    translator: translator.clone(),
                    key,
                });
            }
        }
    }

    let mut records = existing;
    let mut written = 0;
    let mut failed = 0;
    let ctx = Ctx {
        plan,
        config_hash: &config_hash,
        originals: &originals,
    };
    for (job, message) in failed_early {
        let record = ctx.record(
            &job,
            String::new(),
            Utc::now(),
            Outcome::failed(Stage::Transform, "input", message, None),
        );
        writer.append(&record)?;
        records.push(record);
        written += 1;
        failed += 1;
    }
    let mut results = stream::iter(jobs).map(|job| ctx.execute(job)).buffer_unordered(limit);
    while let Some(record) = results.next().await {
        writer.append(&record)?;
        if !record.is_scored() {
            failed += 1;
        }
        written += 1;
        records.push(record);
    }
    Ok(RunOutcome {
        records,
        written,
        skipped,
        failed,
    })
}

fn transform_passage(passage: &Passage, plan: &EvalPlan, engine: Option<&mut Jabberwockifier>) -> Result<String> {
    let base = match (&passage.transformed, engine) {
        (Some(t), _) => t.clone(),
        (None, Some(engine)) => engine.transform(&passage.text)?.text,
        (None, None) => mask(&passage.text, &plan.transform, &plan.fws)?,
    };
    if passage.pins.is_empty() {
        return Ok(base);
    }
    Ok(pin(&base, &passage.pins, None)?.text)
}

struct Job<'a> {
    prep: &'a Prepared<'a>,
    template: &'a PromptTemplate,
    translator: Arc<dyn Translator>,
    key: String,
}

struct Outcome {
    translation: Option<String>,
    similarity: Option<f64>,
    error: Option<RecordError>,
}

impl Outcome {
    fn failed(stage: Stage, kind: &str, message: String, unscored: Option<String>) -> Self {
        Outcome {
            translation: None,
            similarity: None,
            error: Some(RecordError {
                stage,
                kind: kind.to_string(),
                message,
                unscored_translation: unscored,
            }),
        }
    }
}

struct Ctx<'a> {
    plan: &'a EvalPlan,
    config_hash: &'a str,
    originals: &'a [OnceCell<Result<EmbeddingVector, RemoteError>>],
}

impl Ctx<'_> {
    async fn execute(&self, job: Job<'_>) -> RunRecord {
        let started = Utc::now();
        let transformed = job.prep.transformed.as_deref().unwrap_or_default();
        let prompt = job.template.build(transformed);
        let outcome = self.score(&job, &prompt).await;
        self.record(&job, prompt, started, outcome)
    }

    async fn score(&self, job: &Job<'_>, prompt: &str) -> Outcome {
        let original = &job.prep.passage.text;
        let translation = match job.translator.translate(prompt, original).await {
            Ok(t) => t,
            Err(e) => return Outcome::failed(Stage::Translate, &e.kind.to_string(), e.to_string(), None),
        };
        let embedder = &self.plan.embedder;
        let reference = self.originals[job.prep.index]
            .get_or_init(|| async { embedder.embed(original).await })
            .await;
        let reference = match reference {
            Ok(v) => v,
            Err(e) => return Outcome::failed(Stage::Embed, &e.kind.to_string(), e.to_string(), Some(translation)),
        };
        let candidate = match embedder.embed(&translation).await {
            Ok(v) => v,
            Err(e) => return Outcome::failed(Stage::Embed, &e.kind.to_string(), e.to_string(), Some(translation)),
        };
        match cosine(reference, &candidate) {
            Ok(s) => Outcome {
                translation: Some(translation),
                similarity: Some(s),
                error: None,
            },
            Err(e) => {
                let kind = match e {
                    Error::UndefinedSimilarity(_) => "undefined_similarity",
                    _ => "input",
                };
                Outcome::failed(Stage::Score, kind, e.to_string(), Some(translation))
            }
        }
    }

    fn record(&self, job: &Job<'_>, prompt: String, started: chrono::DateTime<Utc>, outcome: Outcome) -> RunRecord {
        let passage = job.prep.passage;
        let transformed = job.prep.transformed.clone().unwrap_or_default();
        let mode = self.plan.transform.mode;
        RunRecord {
            v: RECORD_VERSION,
            id: uuid::Uuid::new_v4().to_string(),
            passage_id: passage.id.clone(),
            label: passage.label.clone(),
            condition: format!("{mode}:{}@{}", job.template.name(), job.translator.model_id()),
            mode,
            template_name: job.template.name().to_string(),
            model_id: job.translator.model_id().to_string(),
            embedding_model_id: self.plan.embedder.model_id().to_string(),
            counts: Counts {
                original_chars: passage.text.chars().count(),
                original_words: passage.text.split_whitespace().count(),
                transformed_chars: transformed.chars().count(),
                prompt_chars: prompt.chars().count(),
                translation_chars: outcome.translation.as_deref().map_or(0, |t| t.chars().count()),
            },
            original_text: passage.text.clone(),
            transformed_text: transformed,
            prompt,
            translation: outcome.translation,
            similarity: outcome.similarity,
            error: outcome.error,
            seed: self.plan.transform.seed,
            config_hash: self.config_hash.to_string(),
            cache_key: job.key.clone(),
            started_at: started,
            finished_at: Utc::now(),
        }
    }
}
