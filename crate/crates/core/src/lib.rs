//! Content-word replacement for English text.
//!
//! The crate is split along the pipeline:
//!
//! * [`textmodel`] tokenizes text and annotates each word with its class,
//!   case pattern and inflectional suffix.
//! * [`pseudogen`] samples pronounceable nonsense stems from a character
//!   n-gram model and filters out anything too close to a real word.
//! * [`transform`] rewrites documents: nonsense replacement, `BLANK`
//!   masking, phrase pinning and inversion through a persisted [`StemMap`].
//! * [`english`] bundles the default English lexicon and function-word list.

pub mod english;
mod error;
pub mod pseudogen;
pub mod textmodel;
pub mod transform;

pub use error::{Error, Result};
pub use pseudogen::{CharNgramModel, GenLimits, LengthSpec, Lexicon, NoveltyFilter, PseudowordGenerator};
pub use textmodel::{
    classify, recase, segment, tokenize, tokenize_bytes, CasePattern, FunctionWordSet, MorphSplit, Suffix, Token,
    TokenClass,
};
pub use transform::{
    invert, jabberwockify, mask, pin, Inversion, Jabberwockifier, Jabberwocky, Mode, Pin, PinOutcome, PinResult,
    ResidueEntry, Scope, StemMap, TransformConfig,
};
