//! Pseudoword generation.
//!
//! Candidates are sampled from a character n-gram model trained on a real
//! lexicon, so every letter sequence they contain occurs in some English
//! word. A [`NoveltyFilter`] then rejects real words and near neighbours
//! of frequent words.
//!
//! All randomness flows through [`SeededRng`] (ChaCha8 seeded with
//! `seed_from_u64`), and model weights are stored as integers, so a given
//! seed yields the same words on every platform.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BEGIN: char = '^';
pub const END: char = '$';

/// Fixed-point scale for `ln(1 + frequency)` weights.
const WEIGHT_SCALE: f64 = 1_000_000.0;

pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

fn is_lexicon_word(word: &str) -> bool {
    !word.is_empty() && word.chars().all(|c| c.is_alphabetic() && !c.is_uppercase())
}

/// Word list with frequencies, in file order.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    entries: Vec<(String, u64)>,
}

impl Lexicon {
    /// Parses `word<TAB>frequency` lines; the frequency defaults to 1.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Format {
                source_name: source_name.to_string(),
                line: idx + 1,
                message,
            };
            let mut fields = line.split('\t');
            let word = fields.next().unwrap_or_default().trim();
            let freq = match fields.next().map(str::trim) {
                None | Some("") => 1,
                Some(f) => f.parse::<u64>().map_err(|_| err(format!("bad frequency {f:?}")))?,
            };
            if !is_lexicon_word(word) {
                return Err(err(format!("{word:?} is not a lowercase alphabetic word")));
            }
            entries.push((word.to_string(), freq));
        }
        Ok(Lexicon { entries })
    }

    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let entries: Vec<(String, u64)> = entries.into_iter().map(|(w, f)| (w.into(), f)).collect();
        if let Some((bad, _)) = entries.iter().find(|(w, _)| !is_lexicon_word(w)) {
            return Err(Error::input(format!("{bad:?} is not a lowercase alphabetic word")));
        }
        Ok(Lexicon { entries })
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Words ordered by descending frequency; ties keep file order.
    pub fn by_frequency(&self) -> Vec<&str> {
        let mut idx: Vec<usize> = (0..self.entries.len()).collect();
        idx.sort_by_key(|&i| std::cmp::Reverse(self.entries[i].1));
        idx.into_iter().map(|i| self.entries[i].0.as_str()).collect()
    }
}

/// Character n-gram statistics with begin/end sentinels.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CharNgramModel {
    order: usize,
    counts: BTreeMap<String, BTreeMap<char, u64>>,
    alphabet: BTreeSet<char>,
}

impl CharNgramModel {
    /// Trains on `(word, frequency)` pairs. Each word contributes
    /// `ln(1 + frequency)` to every n-gram it contains, so a handful of very
    /// frequent words cannot dominate the letter statistics.
    pub fn train<I, S>(entries: I, order: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: AsRef<str>,
    {
        if order < 2 {
            return Err(Error::input(format!("n-gram order must be at least 2, got {order}")));
        }
        let mut counts: BTreeMap<String, BTreeMap<char, u64>> = BTreeMap::new();
        let mut alphabet = BTreeSet::new();
        let mut seen_any = false;

        for (word, freq) in entries {
            let word = word.as_ref();
            if !is_lexicon_word(word) {
                return Err(Error::input(format!("{word:?} is not a lowercase alphabetic word")));
            }
            seen_any = true;
            let weight = ((freq as f64).ln_1p() * WEIGHT_SCALE).round() as u64;
            if weight == 0 {
                continue;
            }
            alphabet.extend(word.chars());
            let padded: Vec<char> = std::iter::repeat_n(BEGIN, order - 1)
                .chain(word.chars())
                .chain(std::iter::once(END))
                .collect();
            for gram in padded.windows(order) {
                let context: String = gram[..order - 1].iter().collect();
                *counts.entry(context).or_default().entry(gram[order - 1]).or_default() += weight;
            }
        }
        if !seen_any {
            return Err(Error::input("cannot train on an empty lexicon"));
        }
        if counts.is_empty() {
            return Err(Error::input("lexicon has no word with positive frequency"));
        }
        Ok(CharNgramModel {
            order,
            counts,
            alphabet,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet(&self) -> &BTreeSet<char> {
        &self.alphabet
    }

    pub fn transitions(&self, context: &str) -> Option<&BTreeMap<char, u64>> {
        self.counts.get(context)
    }

    /// `P(next | context)`; an unknown context is an error.
    pub fn probability(&self, context: &str, next: char) -> Result<f64> {
        let dist = self
            .counts
            .get(context)
            .ok_or_else(|| Error::UnseenContext(context.to_string()))?;
        let total: u64 = dist.values().sum();
        Ok(dist.get(&next).copied().unwrap_or(0) as f64 / total as f64)
    }

    /// Samples a lowercase string of `min..=max` characters.
    ///
    /// A walk that reaches a context with no admissible continuation is
    /// restarted; after `restarts` failed walks the call gives up.
    pub fn sample_stem<R: Rng + ?Sized>(&self, min: usize, max: usize, rng: &mut R, restarts: usize) -> Result<String> {
        if !(1 <= min && min <= max && max <= 20) {
            return Err(Error::input(format!("length range {min}..={max} outside 1..=20")));
        }
        let mut candidates: Vec<(char, u64)> = Vec::new();
        for _ in 0..restarts {
            let mut context: Vec<char> = vec![BEGIN; self.order - 1];
            let mut out = String::new();
            let mut len = 0;
            loop {
                let key: String = context.iter().collect();
                let Some(dist) = self.counts.get(&key) else {
                    break;
                };
                candidates.clear();
                candidates.extend(
                    dist.iter()
                        .filter(|(c, _)| if **c == END { len >= min } else { len < max })
                        .map(|(c, w)| (*c, *w)),
                );
                let total: u64 = candidates.iter().map(|(_, w)| w).sum();
                if total == 0 {
                    break;
                }
                let mut pick = rng.random_range(0..total);
                let mut next = END;
                for (c, w) in &candidates {
                    if pick < *w {
                        next = *c;
                        break;
                    }
                    pick -= w;
                }
                if next == END {
                    return Ok(out);
                }
                out.push(next);
                len += 1;
                context.remove(0);
                context.push(next);
            }
        }
        Err(Error::Exhausted {
            attempts: restarts,
            constraint: "sampling dead end".into(),
            tally: vec![("sampling dead end".into(), restarts)],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rejection {
    LexiconMember,
    NearNeighbor(String),
}

impl Rejection {
    pub fn constraint(&self) -> &'static str {
        match self {
            Rejection::LexiconMember => "lexicon member",
            Rejection::NearNeighbor(_) => "near neighbor",
        }
    }
}

/// Rejects real words and strings within `min_edit_distance - 1` edits of
/// a frequent word.
#[derive(Clone, Debug)]
pub struct NoveltyFilter {
    lexicon: HashSet<String>,
    neighborhood: HashSet<String>,
    neighborhood_alphabet: Vec<char>,
    min_edit_distance: usize,
}

impl NoveltyFilter {
    /// Builds a filter whose neighborhood is the `neighborhood_size` most
    /// frequent lexicon words.
    pub fn new(lexicon: &Lexicon, neighborhood_size: usize, min_edit_distance: usize) -> Result<Self> {
        let frequent = lexicon.by_frequency();
        let neighborhood = frequent.iter().take(neighborhood_size).copied();
        Self::from_parts(
            lexicon.entries().iter().map(|(w, _)| w.as_str()),
            neighborhood,
            min_edit_distance,
        )
    }

    pub fn from_parts<'a>(
        lexicon: impl IntoIterator<Item = &'a str>,
        neighborhood: impl IntoIterator<Item = &'a str>,
        min_edit_distance: usize,
    ) -> Result<Self> {
        if min_edit_distance < 1 {
            return Err(Error::input("min_edit_distance must be at least 1"));
        }
        let neighborhood: HashSet<String> = neighborhood.into_iter().map(str::to_string).collect();
        let alphabet: BTreeSet<char> = neighborhood.iter().flat_map(|w| w.chars()).collect();
        Ok(NoveltyFilter {
            lexicon: lexicon.into_iter().map(str::to_string).collect(),
            neighborhood,
            neighborhood_alphabet: alphabet.into_iter().collect(),
            min_edit_distance,
        })
    }

    pub fn min_edit_distance(&self) -> usize {
        self.min_edit_distance
    }

    pub fn is_lexicon_member(&self, word: &str) -> bool {
        self.lexicon.contains(word)
    }

    pub fn check(&self, candidate: &str) -> Result<(), Rejection> {
        if self.lexicon.contains(candidate) {
            return Err(Rejection::LexiconMember);
        }
        let near = match self.min_edit_distance {
            1 => None,
            2 => self.neighbor_by_ball(candidate),
            _ => self.neighbor_by_scan(candidate),
        };
        match near {
            Some(word) => Err(Rejection::NearNeighbor(word)),
            None => Ok(()),
        }
    }

    pub fn accept(&self, candidate: &str) -> bool {
        self.check(candidate).is_ok()
    }

    /// Pairwise Levenshtein against every neighborhood word of compatible
    /// length.
    fn neighbor_by_scan(&self, candidate: &str) -> Option<String> {
        let len = candidate.chars().count();
        let d = self.min_edit_distance;
        let mut hits: Vec<&String> = self
            .neighborhood
            .iter()
            .filter(|v| v.chars().count().abs_diff(len) < d)
            .filter(|v| strsim::levenshtein(candidate, v) < d)
            .collect();
        hits.sort();
        hits.first().map(|s| s.to_string())
    }

    /// Enumerates every string one edit away and looks it up; exact for a
    /// minimum distance of 2.
    fn neighbor_by_ball(&self, candidate: &str) -> Option<String> {
        let chars: Vec<char> = candidate.chars().collect();
        if self.neighborhood.contains(candidate) {
            return Some(candidate.to_string());
        }
        let mut buf = String::with_capacity(candidate.len() + 4);
        let mut probe = |parts: &[&[char]], extra: Option<char>, at: usize| -> Option<String> {
            buf.clear();
            buf.extend(parts[0][..at].iter());
            buf.extend(extra);
            buf.extend(parts[1].iter());
            self.neighborhood.contains(&buf).then(|| buf.clone())
        };
        for i in 0..chars.len() {
            // deletion
            if let Some(hit) = probe(&[&chars, &chars[i + 1..]], None, i) {
                return Some(hit);
            }
            // substitution
            for &c in &self.neighborhood_alphabet {
                if c != chars[i] {
                    if let Some(hit) = probe(&[&chars, &chars[i + 1..]], Some(c), i) {
                        return Some(hit);
                    }
                }
            }
        }
        // insertion
        for i in 0..=chars.len() {
            for &c in &self.neighborhood_alphabet {
                if let Some(hit) = probe(&[&chars, &chars[i..]], Some(c), i) {
                    return Some(hit);
                }
            }
        }
        None
    }
}

/// Allowed length of a generated stem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthSpec {
    pub min: usize,
    pub max: usize,
}

impl LengthSpec {
    pub const SLACK: usize = 2;
    pub const FLOOR: usize = 3;
    pub const CEILING: usize = 12;

    /// Source length plus or minus two, clamped to `3..=12`.
    pub fn around(source_len: usize) -> Self {
        let clamp = |n: usize| n.clamp(Self::FLOOR, Self::CEILING);
        LengthSpec {
            min: clamp(source_len.saturating_sub(Self::SLACK)),
            max: clamp(source_len + Self::SLACK),
        }
    }

    pub fn contains(&self, len: usize) -> bool {
        (self.min..=self.max).contains(&len)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenLimits {
    /// Walk restarts inside one `sample_stem` call.
    pub sample_restarts: usize,
    /// Candidates drawn by `generate_stem` before giving up.
    pub max_attempts: usize,
}

impl Default for GenLimits {
    fn default() -> Self {
        GenLimits {
            sample_restarts: 1000,
            max_attempts: 10_000,
        }
    }
}

/// Rejection-samples until a candidate passes the filter and the caller's
/// own constraint. `reject` returns the name of the violated constraint.
pub fn generate_stem<R, F>(
    model: &CharNgramModel,
    filter: &NoveltyFilter,
    spec: LengthSpec,
    rng: &mut R,
    limits: GenLimits,
    reject: F,
) -> Result<String>
where
    R: Rng + ?Sized,
    F: Fn(&str) -> Option<&'static str>,
{
    let mut tally: BTreeMap<&'static str, usize> = BTreeMap::new();
    for _ in 0..limits.max_attempts {
        let candidate = model.sample_stem(spec.min, spec.max, rng, limits.sample_restarts)?;
        if let Err(rejection) = filter.check(&candidate) {
            *tally.entry(rejection.constraint()).or_default() += 1;
            continue;
        }
        if let Some(constraint) = reject(&candidate) {
            *tally.entry(constraint).or_default() += 1;
            continue;
        }
        return Ok(candidate);
    }
    let mut tally: Vec<(String, usize)> = tally.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    tally.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Err(Error::Exhausted {
        attempts: limits.max_attempts,
        constraint: tally.first().map(|(k, _)| k.clone()).unwrap_or_default(),
        tally,
    })
}

/// Model, filter and limits bundled for repeated generation.
#[derive(Clone, Debug)]
pub struct PseudowordGenerator {
    pub model: Arc<CharNgramModel>,
    pub filter: Arc<NoveltyFilter>,
    pub limits: GenLimits,
}

impl PseudowordGenerator {
    pub fn new(model: Arc<CharNgramModel>, filter: Arc<NoveltyFilter>) -> Self {
        PseudowordGenerator {
            model,
            filter,
            limits: GenLimits::default(),
        }
    }

    pub fn generate<R, F>(&self, spec: LengthSpec, rng: &mut R, reject: F) -> Result<String>
    where
        R: Rng + ?Sized,
        F: Fn(&str) -> Option<&'static str>,
    {
        generate_stem(&self.model, &self.filter, spec, rng, self.limits, reject)
    }

    /// `n` distinct pseudowords with lengths drawn from `spec`.
    pub fn batch<R: Rng + ?Sized>(&self, n: usize, spec: LengthSpec, rng: &mut R) -> Result<Vec<String>> {
        let mut seen = HashSet::with_capacity(n);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let word = self.generate(spec, rng, |w| seen.contains(w).then_some("already generated"))?;
            seen.insert(word.clone());
            out.push(word);
        }
        Ok(out)
    }
}
