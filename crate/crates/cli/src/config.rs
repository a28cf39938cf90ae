//! The optional TOML config file. Relative paths inside it are resolved
//! against the file's directory, and every referenced file is loaded
//! before any command runs.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use jabber_core::{
    english, CharNgramModel, FunctionWordSet, Lexicon, Mode, NoveltyFilter, Pin, PseudowordGenerator, Scope,
    TransformConfig,
};
use jabber_harness::agent::{SessionConfig, AGENT_SYSTEM_PROMPT};
use jabber_harness::endpoint::{EmbedderConfig, HttpEndpointConfig, TranslatorConfig};
use jabber_harness::prompt::PromptTemplate;
use jabber_harness::report::Comparison;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub resources: Resources,
    #[serde(default)]
    pub transform: TransformSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub play: PlaySection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resources {
    pub lexicon: Option<PathBuf>,
    pub function_words: Option<PathBuf>,
    pub order: Option<usize>,
    pub neighborhood: Option<usize>,
    pub min_edit_distance: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSection {
    pub mode: Option<Mode>,
    pub replacement_fraction: Option<f64>,
    pub retain_digits: Option<bool>,
    pub scope: Option<Scope>,
    #[serde(default)]
    pub pins: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub concurrency_limit: Option<usize>,
    #[serde(default)]
    pub templates: Vec<PathBuf>,
    #[serde(default)]
    pub translators: Vec<TranslatorConfig>,
    pub embedder: Option<EmbedderConfig>,
    #[serde(default)]
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaySection {
    pub llm: Option<HttpEndpointConfig>,
    pub system_prompt: Option<PathBuf>,
    pub prompt_marker: Option<String>,
    pub max_turns: Option<usize>,
    pub context_turns: Option<usize>,
    pub startup_timeout_secs: Option<f64>,
    pub turn_timeout_secs: Option<f64>,
    pub quiet_period_ms: Option<u64>,
}

/// Config plus everything it points to, loaded and checked.
pub struct Loaded {
    pub config: CliConfig,
    pub fws: Arc<FunctionWordSet>,
    pub generator: PseudowordGenerator,
    pub templates: Vec<PromptTemplate>,
    pub system_prompt: String,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn load(path: Option<&Path>) -> Result<Loaded> {
    let (config, base) = match path {
        Some(p) => {
            let text = read(p)?;
            let config: CliConfig = toml::from_str(&text).with_context(|| format!("invalid config {}", p.display()))?;
            (config, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (CliConfig::default(), PathBuf::new()),
    };

    let r = &config.resources;
    let fws = match &r.function_words {
        Some(p) => {
            let p = resolve(&base, p);
            Arc::new(
                FunctionWordSet::parse(&read(&p)?)
                    .with_context(|| format!("invalid function-word list {}", p.display()))?,
            )
        }
        None => Arc::new(english::function_words().clone()),
    };
    let custom_model = r.lexicon.is_some() || r.order.is_some_and(|o| o != english::DEFAULT_ORDER);
    let custom_filter = r.lexicon.is_some()
        || r.neighborhood.is_some_and(|n| n != english::DEFAULT_NEIGHBORHOOD)
        || r.min_edit_distance
            .is_some_and(|d| d != english::DEFAULT_MIN_EDIT_DISTANCE);
    let generator = if custom_model || custom_filter {
        let lexicon = match &r.lexicon {
            Some(p) => {
                let p = resolve(&base, p);
                Lexicon::parse(&read(&p)?, &p.display().to_string())?
            }
            None => english::lexicon().clone(),
        };
        let entries = lexicon.entries().iter().map(|(w, f)| (w.as_str(), *f));
        let model = CharNgramModel::train(entries, r.order.unwrap_or(english::DEFAULT_ORDER))?;
        let filter = NoveltyFilter::new(
            &lexicon,
            r.neighborhood.unwrap_or(english::DEFAULT_NEIGHBORHOOD),
            r.min_edit_distance.unwrap_or(english::DEFAULT_MIN_EDIT_DISTANCE),
        )?;
        PseudowordGenerator::new(Arc::new(model), Arc::new(filter))
    } else {
        english::generator()
    };

    let templates = config
        .eval
        .templates
        .iter()
        .map(|p| PromptTemplate::from_file(&resolve(&base, p)).map_err(anyhow::Error::from))
        .collect::<Result<Vec<_>>>()?;
    let system_prompt = match &config.play.system_prompt {
        Some(p) => read(&resolve(&base, p))?,
        None => AGENT_SYSTEM_PROMPT.to_string(),
    };
    for pin in &config.transform.pins {
        pin.parse::<Pin>()?;
    }
    for (name, secs) in [
        ("play.startup_timeout_secs", config.play.startup_timeout_secs),
        ("play.turn_timeout_secs", config.play.turn_timeout_secs),
    ] {
        if secs.is_some_and(|s| !(s.is_finite() && s > 0.0)) {
            bail!("{name} must be a positive number of seconds");
        }
    }
    if config.eval.concurrency_limit == Some(0) {
        bail!("eval.concurrency_limit must be at least 1");
    }
    Ok(Loaded {
        config,
        fws,
        generator,
        templates,
        system_prompt,
    })
}

impl Loaded {
    /// Transform settings from the config, with command-line overrides.
    pub fn transform(
        &self,
        seed: Option<u64>,
        fraction: Option<f64>,
        scope: Option<Scope>,
        pins: &[Pin],
    ) -> Result<TransformConfig> {
        let t = &self.config.transform;
        let mut all_pins: Vec<Pin> = t.pins.iter().map(|p| p.parse()).collect::<Result<_, _>>()?;
        all_pins.extend(pins.iter().cloned());
        let config = TransformConfig {
            mode: t.mode.unwrap_or(Mode::Jabberwocky),
            replacement_fraction: fraction.or(t.replacement_fraction).unwrap_or(1.0),
            retain_digits: t.retain_digits.unwrap_or(true),
            seed: seed.or(self.config.seed).unwrap_or(0),
            pins: all_pins,
            scope: scope.or(t.scope).unwrap_or_default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn session(&self) -> SessionConfig {
        let p = &self.config.play;
        let d = SessionConfig::default();
        SessionConfig {
            prompt_marker: p.prompt_marker.clone().unwrap_or(d.prompt_marker),
            startup_timeout: p
                .startup_timeout_secs
                .map(Duration::from_secs_f64)
                .unwrap_or(d.startup_timeout),
            turn_timeout: p
                .turn_timeout_secs
                .map(Duration::from_secs_f64)
                .unwrap_or(d.turn_timeout),
            quiet_period: p.quiet_period_ms.map(Duration::from_millis),
        }
    }
}
