//! Bundled English resources.
//!
//! The lexicon holds the 30 000 most frequent lowercase alphabetic English
//! word forms with frequencies per billion words. Everything here is built
//! once on first use.

use std::sync::{Arc, OnceLock};

use crate::pseudogen::{CharNgramModel, Lexicon, NoveltyFilter, PseudowordGenerator};
use crate::textmodel::FunctionWordSet;

pub const LEXICON_TSV: &str = include_str!("../data/lexicon_en.tsv");
pub const FUNCTION_WORDS_TXT: &str = include_str!("../data/function_words_en.txt");

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_NEIGHBORHOOD: usize = 5_000;
pub const DEFAULT_MIN_EDIT_DISTANCE: usize = 2;

pub fn function_words() -> &'static FunctionWordSet {
    static SET: OnceLock<FunctionWordSet> = OnceLock::new();
    SET.get_or_init(|| FunctionWordSet::parse(FUNCTION_WORDS_TXT).expect("bundled function-word list parses"))
}

pub fn lexicon() -> &'static Lexicon {
    static LEX: OnceLock<Lexicon> = OnceLock::new();
    LEX.get_or_init(|| Lexicon::parse(LEXICON_TSV, "lexicon_en.tsv").expect("bundled lexicon parses"))
}

pub fn model() -> Arc<CharNgramModel> {
    static MODEL: OnceLock<Arc<CharNgramModel>> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let entries = lexicon().entries().iter().map(|(w, f)| (w.as_str(), *f));
            Arc::new(CharNgramModel::train(entries, DEFAULT_ORDER).expect("bundled lexicon trains"))
        })
        .clone()
}

pub fn filter() -> Arc<NoveltyFilter> {
    static FILTER: OnceLock<Arc<NoveltyFilter>> = OnceLock::new();
    FILTER
        .get_or_init(|| {
            Arc::new(
                NoveltyFilter::new(lexicon(), DEFAULT_NEIGHBORHOOD, DEFAULT_MIN_EDIT_DISTANCE)
                    .expect("default filter parameters are valid"),
            )
        })
        .clone()
}

pub fn generator() -> PseudowordGenerator {
    PseudowordGenerator::new(model(), filter())
}
