//! Tokenization and word-level annotation.
//!
//! A document is split into tokens that partition it exactly: concatenating
//! the token surfaces in order gives back the input byte for byte. Every
//! alphabetic word is classified as a function word (kept verbatim by all
//! transforms) or a content word, and content words carry a split into a
//! stem and one of five inflectional suffixes.

use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenClass {
    Content,
    Function,
    NumeralDigit,
    Punctuation,
    Whitespace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CasePattern {
    AllLower,
    InitialCap,
    AllCaps,
    Mixed,
}

impl CasePattern {
    /// Case pattern of a word. Characters without case count as lowercase,
    /// and a single uppercase letter is `InitialCap`.
    pub fn of(word: &str) -> Self {
        let mut chars = word.chars();
        let Some(first) = chars.next() else {
            return CasePattern::AllLower;
        };
        let rest: Vec<bool> = chars.map(char::is_uppercase).collect();
        match (first.is_uppercase(), rest.iter().all(|u| *u), rest.iter().any(|u| *u)) {
            (false, _, false) => CasePattern::AllLower,
            (true, _, false) => CasePattern::InitialCap,
            (true, true, true) => CasePattern::AllCaps,
            _ => CasePattern::Mixed,
        }
    }
}

/// The inflectional suffixes a content word may carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suffix {
    None,
    PluralS,
    PastEd,
    ProgIng,
    PossessiveS,
}

impl Suffix {
    /// Spelling used when the suffix is attached to a replacement stem.
    /// Plurals are always `s` and past forms always `ed`, with no spelling
    /// adjustment to the stem (`weash` + `s`, `dwoise` + `ed`).
    pub fn canonical(self) -> &'static str {
        match self {
            Suffix::None => "",
            Suffix::PluralS => "s",
            Suffix::PastEd => "ed",
            Suffix::ProgIng => "ing",
            Suffix::PossessiveS => "'s",
        }
    }
}

/// A content word split into a lowercase stem and its inflection.
///
/// `spelling` is the lowercased suffix text as it occurs in the word, so
/// `stem + spelling` is always the lowercased surface. Inside a tokenized
/// document a possessive lives in the following `'s` token; the word itself
/// then has `suffix == PossessiveS` and an empty `spelling`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MorphSplit {
    pub stem: String,
    pub suffix: Suffix,
    pub spelling: String,
}

impl MorphSplit {
    fn bare(word: &str) -> Self {
        MorphSplit {
            stem: word.to_lowercase(),
            suffix: Suffix::None,
            spelling: String::new(),
        }
    }

    /// The text appended to a replacement stem for this word.
    pub fn reattach(&self) -> &'static str {
        if self.spelling.is_empty() {
            ""
        } else {
            self.suffix.canonical()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub span: Range<usize>,
    pub class: TokenClass,
    pub case_pattern: CasePattern,
    pub morph: Option<MorphSplit>,
}

impl Token {
    pub fn is_word(&self) -> bool {
        matches!(self.class, TokenClass::Content | TokenClass::Function)
    }
}

/// Closed-class vocabulary. Lookups ignore case and treat the curly
/// apostrophe as a straight one.
#[derive(Clone, Debug, Default)]
pub struct FunctionWordSet {
    words: HashSet<String>,
}

impl FunctionWordSet {
    /// Parses the one-word-per-line format; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut words = HashSet::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.chars().any(char::is_whitespace) {
                return Err(Error::Format {
                    source_name: "function-word list".into(),
                    line: idx + 1,
                    message: format!("expected a single word, got {line:?}"),
                });
            }
            words.insert(normalize_word(line));
        }
        Ok(FunctionWordSet { words })
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        FunctionWordSet {
            words: words.into_iter().map(|w| normalize_word(w.as_ref())).collect(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&normalize_word(word))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub(crate) fn normalize_word(word: &str) -> String {
    word.to_lowercase().replace('\u{2019}', "'")
}

pub(crate) fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

fn is_currency(c: char) -> bool {
    matches!(c, '$' | '€' | '£' | '¥')
}

/// True for digit strings optionally carrying currency, percent, comma and
/// period characters (`$12`, `884`, `3.5%`).
pub fn is_numeral(s: &str) -> bool {
    s.chars().any(|c| c.is_ascii_digit())
        && s.chars()
            .all(|c| c.is_ascii_digit() || is_currency(c) || matches!(c, '%' | ',' | '.'))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LexKind {
    Word,
    Clitic,
    Numeral,
    Whitespace,
    Punct,
}

const CLITICS: [&str; 6] = ["s", "re", "ve", "ll", "d", "m"];

/// Splits text into raw lexemes (byte spans), without classification.
pub(crate) fn lex(text: &str) -> Vec<(Range<usize>, LexKind)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let at = |i: usize| if i < n { chars[i].0 } else { text.len() };
    let ch = |i: usize| if i < n { Some(chars[i].1) } else { None };
    let alpha = |i: usize| ch(i).is_some_and(char::is_alphabetic);

    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let c = chars[i].1;
        if c.is_whitespace() {
            let mut j = i;
            while ch(j).is_some_and(char::is_whitespace) {
                j += 1;
            }
            out.push((at(i)..at(j), LexKind::Whitespace));
            i = j;
        } else if c.is_alphabetic() {
            let mut j = i;
            while alpha(j) {
                j += 1;
            }
            // can't -> ca + n't
            if j - i >= 2
                && matches!(ch(j - 1), Some('n' | 'N'))
                && ch(j).is_some_and(is_apostrophe)
                && matches!(ch(j + 1), Some('t' | 'T'))
                && !alpha(j + 2)
            {
                out.push((at(i)..at(j - 1), LexKind::Word));
                out.push((at(j - 1)..at(j + 2), LexKind::Clitic));
                i = j + 2;
                continue;
            }
            out.push((at(i)..at(j), LexKind::Word));
            i = j;
            if ch(j).is_some_and(is_apostrophe) {
                for clitic in CLITICS {
                    let len = clitic.chars().count();
                    let matches = clitic
                        .chars()
                        .enumerate()
                        .all(|(k, cc)| ch(j + 1 + k).is_some_and(|x| x.to_ascii_lowercase() == cc));
                    if matches && !alpha(j + 1 + len) {
                        out.push((at(j)..at(j + 1 + len), LexKind::Clitic));
                        i = j + 1 + len;
                        break;
                    }
                }
            }
        } else if c.is_ascii_digit() || (is_currency(c) && ch(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut j = i + 1;
            loop {
                while ch(j).is_some_and(|d| d.is_ascii_digit()) {
                    j += 1;
                }
                if matches!(ch(j), Some(',' | '.')) && ch(j + 1).is_some_and(|d| d.is_ascii_digit()) {
                    j += 1;
                    continue;
                }
                break;
            }
            if ch(j) == Some('%') {
                j += 1;
            }
            out.push((at(i)..at(j), LexKind::Numeral));
            i = j;
        } else {
            out.push((at(i)..at(i + 1), LexKind::Punct));
            i += 1;
        }
    }
    out
}

/// Word class of a surface string.
pub fn classify_surface(surface: &str, fws: &FunctionWordSet) -> TokenClass {
    if !surface.is_empty() && surface.chars().all(char::is_whitespace) {
        TokenClass::Whitespace
    } else if fws.contains(surface) {
        TokenClass::Function
    } else if is_numeral(surface) {
        TokenClass::NumeralDigit
    } else if !surface.is_empty() && surface.chars().all(char::is_alphabetic) {
        TokenClass::Content
    } else {
        TokenClass::Punctuation
    }
}

pub fn classify(token: &Token, fws: &FunctionWordSet) -> TokenClass {
    classify_surface(&token.surface, fws)
}

/// Tokenizes `text` and annotates every token.
///
/// Capitalized words that do not start a sentence are treated as proper
/// names and are not suffix-segmented ("States", "Steelers").
pub fn tokenize(text: &str, fws: &FunctionWordSet) -> Vec<Token> {
    let lexemes = lex(text);
    let mut tokens: Vec<Token> = Vec::with_capacity(lexemes.len());
    let mut sentence_start = true;

    for (idx, (span, kind)) in lexemes.iter().enumerate() {
        let surface = &text[span.clone()];
        let class = classify_surface(surface, fws);
        let case_pattern = if *kind == LexKind::Word {
            CasePattern::of(surface)
        } else {
            CasePattern::AllLower
        };
        let morph = (class == TokenClass::Content).then(|| {
            let mut split = if case_pattern != CasePattern::AllLower && !sentence_start {
                MorphSplit::bare(surface)
            } else {
                segment(surface)
            };
            let possessive_follows = lexemes
                .get(idx + 1)
                .is_some_and(|(next, k)| *k == LexKind::Clitic && normalize_word(&text[next.clone()]) == "'s");
            if possessive_follows && split.suffix == Suffix::None {
                split.suffix = Suffix::PossessiveS;
            }
            split
        });

        match kind {
            LexKind::Punct if matches!(surface, "." | "!" | "?") => sentence_start = true,
            LexKind::Word | LexKind::Clitic | LexKind::Numeral => sentence_start = false,
            _ => {}
        }

        tokens.push(Token {
            surface: surface.to_string(),
            span: span.clone(),
            class,
            case_pattern,
            morph,
        });
    }
    tokens
}

/// As [`tokenize`], for raw bytes that must be valid UTF-8.
pub fn tokenize_bytes(bytes: &[u8], fws: &FunctionWordSet) -> Result<Vec<Token>> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| Error::input(format!("invalid UTF-8 at byte {}", e.valid_up_to())))?;
    Ok(tokenize(text, fws))
}

/// Words whose apparent suffix is part of the word itself.
pub const SEGMENTATION_EXCEPTIONS: &[&str] = &[
    // -ing
    "hearing",
    "morning",
    "evening",
    "ceiling",
    "nothing",
    "something",
    "anything",
    "everything",
    "pudding",
    "wedding",
    "darling",
    "sibling",
    "herring",
    "offspring",
    "lightning",
    "awning",
    "shilling",
    "sterling",
    "viking",
    "duckling",
    // -ed
    "hundred",
    "sacred",
    "naked",
    "wicked",
    "kindred",
    "rugged",
    "ragged",
    "hatred",
    "embed",
    "seabed",
    "succeed",
    "exceed",
    "proceed",
    // -s
    "news",
    "series",
    "species",
    "gas",
    "yes",
    "lens",
    "bias",
    "atlas",
    "canvas",
    "alias",
    "chaos",
    "ethos",
    "pathos",
    "kudos",
    "alas",
    "mathematics",
    "physics",
    "economics",
    "politics",
];

fn has_vowel(s: &str) -> bool {
    s.chars().any(|c| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y'))
}

fn usable_stem(stem: &str) -> bool {
    stem.chars().count() >= 2 && has_vowel(stem)
}

/// Splits a word into stem and inflectional suffix.
///
/// Candidates are tried longest first (`'s`, `ing`, `ed`, `es`, `s`). A
/// split needs a stem of at least two characters containing a vowel, which
/// rules out "thing", "need" and "bus". `es` is only split after sibilants
/// (`boxes`, `wishes`); otherwise plural `s` is used (`devices`).
pub fn segment(word: &str) -> MorphSplit {
    let lower = word.to_lowercase();
    if SEGMENTATION_EXCEPTIONS.contains(&lower.as_str()) {
        return MorphSplit::bare(&lower);
    }
    let split = |stem: &str, suffix: Suffix| MorphSplit {
        stem: stem.to_string(),
        suffix,
        spelling: lower[stem.len()..].to_string(),
    };

    for poss in ["'s", "\u{2019}s"] {
        if let Some(stem) = lower.strip_suffix(poss) {
            if stem.chars().count() >= 2 {
                return split(stem, Suffix::PossessiveS);
            }
        }
    }
    if let Some(stem) = lower.strip_suffix("ing") {
        if usable_stem(stem) {
            return split(stem, Suffix::ProgIng);
        }
    }
    if let Some(stem) = lower.strip_suffix("ed") {
        // need, speed, freed: the e belongs to the base
        let eed_base = lower.ends_with("eed") && !has_vowel(&stem[..stem.len() - 1]);
        if usable_stem(stem) && !eed_base {
            return split(stem, Suffix::PastEd);
        }
    }
    if let Some(stem) = lower.strip_suffix("es") {
        let sibilant = ["s", "x", "z", "ch", "sh"].iter().any(|s| stem.ends_with(s));
        if sibilant && usable_stem(stem) {
            return split(stem, Suffix::PluralS);
        }
    }
    if let Some(stem) = lower.strip_suffix('s') {
        let blocked = stem.ends_with('s') || stem.ends_with('u') || stem.ends_with('i') || stem.ends_with('\'');
        if !blocked && usable_stem(stem) {
            return split(stem, Suffix::PluralS);
        }
    }
    MorphSplit::bare(&lower)
}

/// Applies a case pattern to a lowercase string. `Mixed` is rendered as
/// `InitialCap`.
pub fn recase(pattern: CasePattern, s: &str) -> Result<String> {
    let mut chars = s.chars();
    let Some(first) = chars.next() else {
        return Err(Error::input("cannot recase an empty string"));
    };
    Ok(match pattern {
        CasePattern::AllLower => s.to_string(),
        CasePattern::AllCaps => s.to_uppercase(),
        CasePattern::InitialCap | CasePattern::Mixed => first.to_uppercase().chain(chars).collect(),
    })
}
