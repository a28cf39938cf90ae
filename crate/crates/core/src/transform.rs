//! Document transforms: nonsense replacement, `BLANK` masking, phrase
//! pinning and inversion.
//!
//! Only content words change. Function words, digits, punctuation and
//! whitespace are copied byte for byte, so word order and token count are
//! preserved. Replacement goes through a [`StemMap`] that assigns each
//! original stem one pseudo-stem for the whole scope, and records the exact
//! original spelling of every replaced surface so that [`invert`] can undo
//! the transform exactly.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pseudogen::{seeded_rng, LengthSpec, PseudowordGenerator, SeededRng};
use crate::textmodel::{
    lex, normalize_word, recase, tokenize, CasePattern, FunctionWordSet, LexKind, MorphSplit, Suffix, Token, TokenClass,
};

pub const BLANK: &str = "BLANK";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Jabberwocky,
    Blank,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Jabberwocky => "jabberwocky",
            Mode::Blank => "blank",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jabberwocky" => Ok(Mode::Jabberwocky),
            "blank" => Ok(Mode::Blank),
            other => Err(Error::input(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    #[default]
    PerDocument,
    PerCorpus,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::PerDocument => "per-document",
            Scope::PerCorpus => "per-corpus",
        })
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-document" => Ok(Scope::PerDocument),
            "per-corpus" => Ok(Scope::PerCorpus),
            other => Err(Error::input(format!("unknown scope {other:?}"))),
        }
    }
}

/// A forced replacement: `source` (a word or phrase) becomes `replacement`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pin {
    pub source: String,
    pub replacement: String,
}

impl Pin {
    pub fn new(source: impl Into<String>, replacement: impl Into<String>) -> Result<Self> {
        let pin = Pin {
            source: source.into(),
            replacement: replacement.into(),
        };
        if pin.source.trim().is_empty() {
            return Err(Error::input("pin source is empty"));
        }
        if pin.replacement.contains(['\t', '\n', '\r']) {
            return Err(Error::input("pin replacement may not contain tabs or line breaks"));
        }
        Ok(pin)
    }

    fn single_word(&self) -> Option<String> {
        let lexemes = lex(self.source.trim());
        match lexemes.as_slice() {
            [(_, LexKind::Word)] => Some(normalize_word(self.source.trim())),
            _ => None,
        }
    }
}

impl FromStr for Pin {
    type Err = Error;

    /// Parses `SOURCE=REPLACEMENT`.
    fn from_str(s: &str) -> Result<Self> {
        let (source, replacement) = s
            .split_once('=')
            .ok_or_else(|| Error::input(format!("pin {s:?} is not of the form SOURCE=REPLACEMENT")))?;
        Pin::new(source.trim(), replacement.trim())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformConfig {
    pub mode: Mode,
    /// Share of content-word types replaced.
    pub replacement_fraction: f64,
    pub retain_digits: bool,
    pub seed: u64,
    pub pins: Vec<Pin>,
    pub scope: Scope,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig {
            mode: Mode::Jabberwocky,
            replacement_fraction: 1.0,
            retain_digits: true,
            seed: 0,
            pins: Vec::new(),
            scope: Scope::PerDocument,
        }
    }
}

impl TransformConfig {
    pub fn jabberwocky(seed: u64) -> Self {
        TransformConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn blank() -> Self {
        TransformConfig {
            mode: Mode::Blank,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.replacement_fraction) {
            return Err(Error::input(format!(
                "replacement fraction {} outside [0, 1]",
                self.replacement_fraction
            )));
        }
        Ok(())
    }

    /// Whether words with this stem are replaced. The choice is a pure
    /// function of seed and stem, so a type is replaced everywhere or
    /// nowhere.
    pub fn selects(&self, stem: &str) -> bool {
        if self.replacement_fraction >= 1.0 {
            return true;
        }
        if self.replacement_fraction <= 0.0 {
            return false;
        }
        unit_hash(self.seed, stem) < self.replacement_fraction
    }
}

fn unit_hash(seed: u64, key: &str) -> f64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(key.as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    (u64::from_be_bytes(head) >> 11) as f64 / (1u64 << 53) as f64
}

/// Injective mapping from original stems to pseudo-stems, plus the exact
/// original spelling behind each replaced surface.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StemMap {
    seed: u64,
    scope: Scope,
    forward: IndexMap<String, String>,
    inverse: HashMap<String, String>,
    surfaces: IndexMap<String, String>,
}

impl StemMap {
    pub fn new(seed: u64, scope: Scope) -> Self {
        StemMap {
            seed,
            scope,
            forward: IndexMap::new(),
            inverse: HashMap::new(),
            surfaces: IndexMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn get(&self, original: &str) -> Option<&str> {
        self.forward.get(original).map(String::as_str)
    }

    pub fn original_of(&self, pseudo: &str) -> Option<&str> {
        self.inverse.get(pseudo).map(String::as_str)
    }

    pub fn contains_pseudo(&self, pseudo: &str) -> bool {
        self.inverse.contains_key(pseudo)
    }

    /// Adds `original -> pseudo`. Re-adding an identical pair is a no-op;
    /// anything that would make the map non-injective is an error.
    pub fn insert(&mut self, original: impl Into<String>, pseudo: impl Into<String>) -> Result<()> {
        let (original, pseudo) = (original.into(), pseudo.into());
        match (self.forward.get(&original), self.inverse.get(&pseudo)) {
            (Some(p), _) if *p == pseudo => Ok(()),
            (Some(p), _) => Err(Error::StemMap(format!("{original:?} is already mapped to {p:?}"))),
            (None, Some(o)) => Err(Error::StemMap(format!("{pseudo:?} is already the image of {o:?}"))),
            (None, None) => {
                self.inverse.insert(pseudo.clone(), original.clone());
                self.forward.insert(original, pseudo);
                Ok(())
            }
        }
    }

    /// Pairs in first-occurrence order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.forward.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Original spelling behind a transformed surface.
    pub fn surface_original(&self, transformed: &str) -> Option<&str> {
        self.surfaces.get(transformed).map(String::as_str)
    }

    pub fn surfaces(&self) -> impl Iterator<Item = (&str, &str)> {
        self.surfaces.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Records that `transformed` stands for `original`. Returns false when
    /// `transformed` already stands for something else.
    pub fn record_surface(&mut self, transformed: &str, original: &str) -> bool {
        match self.surfaces.get(transformed) {
            Some(existing) => existing == original,
            None => {
                self.surfaces.insert(transformed.to_string(), original.to_string());
                true
            }
        }
    }

    /// TSV rendering: a header with seed and scope, `original<TAB>pseudo`
    /// lines in first-occurrence order, then a `#surfaces` section of
    /// `transformed<TAB>original` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("#stemmap\tseed={}\tscope={}\n", self.seed, self.scope);
        for (k, v) in &self.forward {
            out.push_str(&format!("{k}\t{v}\n"));
        }
        out.push_str("#surfaces\n");
        for (k, v) in &self.surfaces {
            out.push_str(&format!("{k}\t{v}\n"));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Format {
            source_name: "stem map".into(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty stem map".into()))?;
        let mut fields = header.split('\t');
        if fields.next() != Some("#stemmap") {
            return Err(err(1, format!("expected #stemmap header, got {header:?}")));
        }
        let mut seed = None;
        let mut scope = None;
        for field in fields {
            match field.split_once('=') {
                Some(("seed", v)) => seed = Some(v.parse::<u64>().map_err(|_| err(1, format!("bad seed {v:?}")))?),
                Some(("scope", v)) => scope = Some(v.parse::<Scope>().map_err(|e| err(1, e.to_string()))?),
                _ => return Err(err(1, format!("unexpected header field {field:?}"))),
            }
        }
        let mut map = StemMap::new(
            seed.ok_or_else(|| err(1, "header lacks seed".into()))?,
            scope.ok_or_else(|| err(1, "header lacks scope".into()))?,
        );
        let mut in_surfaces = false;
        for (idx, line) in lines {
            if line == "#surfaces" {
                in_surfaces = true;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let (a, b) = line
                .split_once('\t')
                .ok_or_else(|| err(idx + 1, format!("expected two tab-separated fields, got {line:?}")))?;
            if in_surfaces {
                if !map.record_surface(a, b) {
                    return Err(err(idx + 1, format!("surface {a:?} listed twice")));
                }
            } else {
                map.insert(a, b).map_err(|e| err(idx + 1, e.to_string()))?;
            }
        }
        Ok(map)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinOutcome {
    pub source: String,
    pub replacement: String,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformReport {
    pub content_tokens: usize,
    pub replaced_tokens: usize,
    pub retained_tokens: usize,
    pub new_stems: usize,
    pub pins: Vec<PinOutcome>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Jabberwocky {
    pub text: String,
    pub report: TransformReport,
}

/// Stateful nonsense-replacement engine.
///
/// With [`Scope::PerDocument`] every call to [`transform`](Self::transform)
/// starts from the initial map and a freshly seeded generator, so a
/// document's output does not depend on what was transformed before it.
/// With [`Scope::PerCorpus`] the map and generator carry over between
/// documents; feed documents in a fixed order for reproducible output.
pub struct Jabberwockifier {
    fws: Arc<FunctionWordSet>,
    generator: PseudowordGenerator,
    config: TransformConfig,
    base_map: StemMap,
    map: StemMap,
    rng: SeededRng,
}

impl Jabberwockifier {
    pub fn new(fws: Arc<FunctionWordSet>, generator: PseudowordGenerator, config: TransformConfig) -> Result<Self> {
        let map = StemMap::new(config.seed, config.scope);
        Self::with_map(fws, generator, config, map)
    }

    /// Starts from an existing map; its pairs are reused, new stems are
    /// added.
    pub fn with_map(
        fws: Arc<FunctionWordSet>,
        generator: PseudowordGenerator,
        config: TransformConfig,
        map: StemMap,
    ) -> Result<Self> {
        config.validate()?;
        if config.mode != Mode::Jabberwocky {
            return Err(Error::input("nonsense replacement needs mode = jabberwocky"));
        }
        Ok(Jabberwockifier {
            rng: seeded_rng(config.seed),
            fws,
            generator,
            config,
            base_map: map.clone(),
            map,
        })
    }

    pub fn config(&self) -> &TransformConfig {
        &self.config
    }

    pub fn map(&self) -> &StemMap {
        &self.map
    }

    pub fn into_map(self) -> StemMap {
        self.map
    }

    pub fn transform(&mut self, text: &str) -> Result<Jabberwocky> {
        if self.config.scope == Scope::PerDocument {
            self.map = self.base_map.clone();
            self.rng = seeded_rng(self.config.seed);
        }
        let stems_before = self.map.len();
        let tokens = tokenize(text, &self.fws);

        // A pseudo-stem must not coincide with a word of the document, or a
        // retained word could later be mistaken for a replacement.
        let reserved: HashSet<String> = tokens
            .iter()
            .filter_map(|t| t.morph.as_ref().map(|m| (t, m)))
            .flat_map(|(t, m)| [t.surface.to_lowercase(), m.stem.clone()])
            .collect();

        let word_pins: HashMap<String, usize> = self
            .config
            .pins
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.single_word().map(|w| (w, i)))
            .collect();
        let mut pin_counts = vec![0usize; self.config.pins.len()];
        let mut report = TransformReport::default();
        let mut out = String::with_capacity(text.len());

        for tok in &tokens {
            let numeral_as_content = tok.class == TokenClass::NumeralDigit && !self.config.retain_digits;
            if tok.class != TokenClass::Content && !numeral_as_content {
                out.push_str(&tok.surface);
                continue;
            }
            report.content_tokens += 1;
            if let Some(&i) = word_pins.get(&normalize_word(&tok.surface)) {
                let replacement = &self.config.pins[i].replacement;
                if !self.map.record_surface(replacement, &tok.surface) {
                    report.warnings.push(format!(
                        "pin replacement {replacement:?} stands for several words; inversion keeps the first"
                    ));
                }
                out.push_str(replacement);
                pin_counts[i] += 1;
                continue;
            }
            let morph = tok.morph.clone().unwrap_or_else(|| MorphSplit {
                stem: tok.surface.clone(),
                suffix: Suffix::None,
                spelling: String::new(),
            });
            if !self.config.selects(&morph.stem) {
                out.push_str(&tok.surface);
                report.retained_tokens += 1;
                continue;
            }
            let replaced = self.replace(tok, &morph, &reserved)?;
            out.push_str(&replaced);
            report.replaced_tokens += 1;
        }

        // Phrase pins, and word pins that matched nothing in the original,
        // are applied to the output.
        let late: Vec<Pin> = self
            .config
            .pins
            .iter()
            .enumerate()
            .filter(|(i, p)| p.single_word().is_none() || pin_counts[*i] == 0)
            .map(|(_, p)| p.clone())
            .collect();
        if !late.is_empty() {
            let pinned = pin(&out, &late, Some(&mut self.map))?;
            out = pinned.text;
            for outcome in pinned.outcomes {
                if let Some(i) = self.config.pins.iter().position(|p| p.source == outcome.source) {
                    pin_counts[i] += outcome.count;
                }
            }
        }
        for (p, count) in self.config.pins.iter().zip(&pin_counts) {
            if *count == 0 {
                report.warnings.push(format!("pin {:?} matched nothing", p.source));
            }
            report.pins.push(PinOutcome {
                source: p.source.clone(),
                replacement: p.replacement.clone(),
                count: *count,
            });
        }
        report.new_stems = self.map.len() - stems_before;
        Ok(Jabberwocky { text: out, report })
    }

    /// Replacement surface for one content token. Tries the stem first; if
    /// the resulting surface already stands for a different original (two
    /// spellings collapsing onto one stem, or case variants of a mixed-case
    /// word), falls back to keying on the whole lowercased word and then on
    /// the exact surface.
    fn replace(&mut self, tok: &Token, morph: &MorphSplit, reserved: &HashSet<String>) -> Result<String> {
        let case = if tok.class == TokenClass::NumeralDigit {
            CasePattern::AllLower
        } else {
            tok.case_pattern
        };
        let lower = tok.surface.to_lowercase();
        let mut keys: Vec<(String, &'static str)> = vec![(morph.stem.clone(), morph.reattach())];
        if lower != morph.stem || !morph.reattach().is_empty() {
            keys.push((lower, ""));
        }
        if tok.surface != tok.surface.to_lowercase() {
            keys.push((tok.surface.clone(), ""));
        }
        for (key, suffix) in keys {
            let pseudo = self.pseudo_for(&key, reserved)?;
            let surface = recase(case, &format!("{pseudo}{suffix}"))?;
            if self.map.record_surface(&surface, &tok.surface) {
                return Ok(surface);
            }
        }
        Err(Error::StemMap(format!(
            "no collision-free replacement for {:?}",
            tok.surface
        )))
    }

    fn pseudo_for(&mut self, key: &str, reserved: &HashSet<String>) -> Result<String> {
        if let Some(p) = self.map.get(key) {
            return Ok(p.to_string());
        }
        let spec = LengthSpec::around(key.chars().count());
        let (map, fws) = (&self.map, &self.fws);
        let pseudo = self.generator.generate(spec, &mut self.rng, |c| {
            if map.contains_pseudo(c) {
                Some("already mapped")
            } else if reserved.contains(c) {
                Some("occurs in document")
            } else if c.ends_with('s') || c.ends_with("ed") || c.ends_with("ing") {
                Some("suffix-like ending")
            } else if ["", "s", "ed", "ing"].iter().any(|s| fws.contains(&format!("{c}{s}"))) {
                Some("function word")
            } else {
                None
            }
        })?;
        self.map.insert(key, pseudo.clone())?;
        Ok(pseudo)
    }
}

/// One-shot replacement of a single document with a fresh map.
pub fn jabberwockify(
    text: &str,
    config: &TransformConfig,
    fws: Arc<FunctionWordSet>,
    generator: PseudowordGenerator,
) -> Result<(Jabberwocky, StemMap)> {
    let mut engine = Jabberwockifier::new(fws, generator, config.clone())?;
    let out = engine.transform(text)?;
    Ok((out, engine.into_map()))
}

/// Replaces every selected content word with `BLANK` plus its suffix
/// (`BLANKs`, `BLANKed`, `BLANKing`); possessive clitics stay in place.
pub fn mask(text: &str, config: &TransformConfig, fws: &FunctionWordSet) -> Result<String> {
    config.validate()?;
    if config.mode != Mode::Blank {
        return Err(Error::input("masking needs mode = blank"));
    }
    let mut out = String::with_capacity(text.len());
    for tok in tokenize(text, fws) {
        match (&tok.class, &tok.morph) {
            (TokenClass::Content, Some(morph)) if config.selects(&morph.stem) => {
                out.push_str(BLANK);
                out.push_str(morph.reattach());
            }
            (TokenClass::NumeralDigit, _) if !config.retain_digits => out.push_str(BLANK),
            _ => out.push_str(&tok.surface),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PinResult {
    pub text: String,
    pub outcomes: Vec<PinOutcome>,
}

/// Substitutes phrases on token boundaries, case-insensitively. Pairs are
/// applied in order, each to the result of the previous one. When a map is
/// given, single-word substitutions are recorded so that inversion can
/// restore the original word.
pub fn pin(text: &str, pairs: &[Pin], mut map: Option<&mut StemMap>) -> Result<PinResult> {
    let mut current = text.to_string();
    let mut outcomes = Vec::with_capacity(pairs.len());
    for p in pairs {
        let (next, matched) = replace_phrase(&current, &p.source, &p.replacement)?;
        if let (Some(map), Some(_)) = (map.as_deref_mut(), p.single_word()) {
            if let Some(first) = matched.first() {
                map.record_surface(&p.replacement, first);
            }
        }
        outcomes.push(PinOutcome {
            source: p.source.clone(),
            replacement: p.replacement.clone(),
            count: matched.len(),
        });
        current = next;
    }
    Ok(PinResult {
        text: current,
        outcomes,
    })
}

fn replace_phrase(text: &str, phrase: &str, replacement: &str) -> Result<(String, Vec<String>)> {
    let key = |kind: LexKind, s: &str| -> Option<String> { (kind != LexKind::Whitespace).then(|| normalize_word(s)) };
    let phrase = phrase.trim();
    let pattern: Vec<Option<String>> = lex(phrase).into_iter().map(|(r, k)| key(k, &phrase[r])).collect();
    if pattern.is_empty() {
        return Err(Error::input("empty pin phrase"));
    }
    let lexemes = lex(text);
    let mut out = String::with_capacity(text.len());
    let mut matched = Vec::new();
    let mut last = 0;
    let mut i = 0;
    while i + pattern.len() <= lexemes.len() {
        let hit = pattern.iter().enumerate().all(|(k, want)| {
            let (range, kind) = &lexemes[i + k];
            match want {
                None => *kind == LexKind::Whitespace,
                Some(w) => key(*kind, &text[range.clone()]).as_deref() == Some(w.as_str()),
            }
        });
        if hit {
            let start = lexemes[i].0.start;
            let end = lexemes[i + pattern.len() - 1].0.end;
            out.push_str(&text[last..start]);
            out.push_str(replacement);
            matched.push(text[start..end].to_string());
            last = end;
            i += pattern.len();
        } else {
            i += 1;
        }
    }
    out.push_str(&text[last..]);
    Ok((out, matched))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidueEntry {
    pub surface: String,
    /// Byte offset in the transformed text.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inversion {
    pub text: String,
    pub restored: usize,
    pub residue: Vec<ResidueEntry>,
}

/// Maps replaced words back to their originals. Words the map cannot
/// account for are copied verbatim and listed as residue.
pub fn invert(text: &str, map: &StemMap, fws: &FunctionWordSet) -> Result<Inversion> {
    let mut out = String::with_capacity(text.len());
    let mut restored = 0;
    let mut residue = Vec::new();
    for tok in tokenize(text, fws) {
        if tok.class != TokenClass::Content {
            out.push_str(&tok.surface);
            continue;
        }
        if let Some(orig) = map.surface_original(&tok.surface) {
            out.push_str(orig);
            restored += 1;
        } else if let Some(orig) = decode(&tok, map)? {
            out.push_str(&orig);
            restored += 1;
        } else {
            residue.push(ResidueEntry {
                surface: tok.surface.clone(),
                offset: tok.span.start,
            });
            out.push_str(&tok.surface);
        }
    }
    Ok(Inversion {
        text: out,
        restored,
        residue,
    })
}

/// Stem-level inversion for surfaces the sidecar does not list, using the
/// canonical suffix spellings.
fn decode(tok: &Token, map: &StemMap) -> Result<Option<String>> {
    let lower = tok.surface.to_lowercase();
    for suffix in ["ing", "ed", "s", ""] {
        if let Some(stem) = lower.strip_suffix(suffix) {
            if let Some(orig) = (!stem.is_empty()).then(|| map.original_of(stem)).flatten() {
                return recase(tok.case_pattern, &format!("{orig}{suffix}")).map(Some);
            }
        }
    }
    Ok(None)
}
