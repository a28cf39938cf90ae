use serde::{Deserialize, Serialize};

use crate::endpoint::ChatModel;
use crate::error::{Error, Result};

const ELICIT_TEMPLATE: &str = include_str!("../../assets/elicit.txt");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconElicitation {
    pub word: String,
    pub definition: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Elicitation {
    pub definitions: Vec<LexiconElicitation>,
    /// Reply lines that were not `word: definition`.
    pub unparsed: Vec<String>,
    pub warnings: Vec<String>,
}

fn occurs(transcript: &str, word: &str) -> bool {
    let word = word.to_lowercase();
    transcript
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric() && c != '\'' && c != '-')
        .any(|w| w == word)
}

/// Asks the model for one-line definitions of `words` as used in the
/// transcript. With no words, the model picks the salient ones.
pub async fn elicit_lexicon(llm: &dyn ChatModel, transcript: &str, words: &[String]) -> Result<Elicitation> {
    if transcript.trim().is_empty() {
        return Err(Error::Input("transcript is empty".into()));
    }
    let warnings = words
        .iter()
        .filter(|w| !occurs(transcript, w))
        .map(|w| format!("{w:?} does not occur in the transcript; asking anyway"))
        .collect();
    let request = if words.is_empty() {
        "Choose the invented words that matter most in this game and define each one.".to_string()
    } else {
        format!("Define each of these words:\n{}", words.join("\n"))
    };
    let prompt = ELICIT_TEMPLATE
        .trim_end()
        .replacen("{TRANSCRIPT}", transcript, 1)
        .replacen("{REQUEST}", &request, 1);
    let reply = llm.complete(None, &prompt).await?;
    let (definitions, unparsed) = parse_definitions(&reply);
    Ok(Elicitation {
        definitions,
        unparsed,
        warnings,
    })
}

/// Reads `word: definition` lines, tolerating list bullets and bold
/// markup. Blank lines are dropped; other lines are returned as they are.
pub fn parse_definitions(text: &str) -> (Vec<LexiconElicitation>, Vec<String>) {
    let mut defs = Vec::new();
    let mut unparsed = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let body = trimmed
            .trim_start_matches(['-', '*', '\u{2022}'])
            .trim_start_matches(|c: char| c.is_ascii_digit())
            .trim_start_matches(['.', ')'])
            .trim();
        let parsed = body.split_once(':').and_then(|(w, d)| {
            let word = w.trim().trim_matches(['*', '_', '`']).trim();
            let definition = d.trim().trim_start_matches(['*', '_']).trim();
            let single = !word.is_empty() && word.split_whitespace().count() <= 2;
            (single && !definition.is_empty()).then(|| LexiconElicitation {
                word: word.to_string(),
                definition: definition.to_string(),
            })
        });
        match parsed {
            Some(d) => defs.push(d),
            None => unparsed.push(line.to_string()),
        }
    }
    (defs, unparsed)
}

/// Two aligned columns, headed `Word` and `Definition`.
pub fn render_table(defs: &[LexiconElicitation]) -> String {
    let width = defs.iter().map(|d| d.word.chars().count()).max().unwrap_or(0).max(4);
    let mut out = format!("{:<width$}  Definition\n", "Word");
    for d in defs {
        out.push_str(&format!("{:<width$}  {}\n", d.word, d.definition));
    }
    out
}
