use std::path::Path;

use jabber_core::Mode;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PLACEHOLDER: &str = "{TEXT}";

const BLANK_TEMPLATE: &str = include_str!("../assets/blank_translate.txt");
const JABBERWOCKY_TEMPLATE: &str = include_str!("../assets/jabberwocky_translate.txt");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    name: String,
    body: String,
}

impl PromptTemplate {
    /// The body must contain `{TEXT}` exactly once.
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Result<Self> {
        let (name, body) = (name.into(), body.into());
        match body.matches(PLACEHOLDER).count() {
            1 => Ok(PromptTemplate { name, body }),
            n => Err(Error::Config(format!(
                "template {name:?} must contain {PLACEHOLDER} exactly once, found {n}"
            ))),
        }
    }

    /// Loads a template file; the name is the file stem and a trailing
    /// line break is dropped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let body = std::fs::read_to_string(path).map_err(Error::io(format!("reading template {}", path.display())))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "template".into());
        PromptTemplate::new(name, body.trim_end_matches(['\n', '\r']))
    }

    pub fn blank() -> Self {
        PromptTemplate::new("blank", BLANK_TEMPLATE.trim_end()).expect("bundled template is valid")
    }

    pub fn jabberwocky() -> Self {
        PromptTemplate::new("jabberwocky", JABBERWOCKY_TEMPLATE.trim_end()).expect("bundled template is valid")
    }

    pub fn default_for(mode: Mode) -> Self {
        match mode {
            Mode::Blank => Self::blank(),
            Mode::Jabberwocky => Self::jabberwocky(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn build(&self, text: &str) -> String {
        self.body.replacen(PLACEHOLDER, text, 1)
    }
}

pub fn build_prompt(template: &PromptTemplate, text: &str) -> String {
    template.build(text)
}
