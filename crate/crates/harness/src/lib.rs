//! Evaluation harness and agent loop.
//!
//! [`corpus::run_corpus`] sends transformed passages to translation
//! endpoints, embeds originals and translations, and appends scored
//! [`records::RunRecord`]s; [`report::summarize`] turns records into
//! per-condition distributions. [`agent`] drives a text game with a chat
//! model.

pub mod agent;
pub mod corpus;
pub mod endpoint;
mod error;
pub mod prompt;
pub mod records;
pub mod report;
pub mod scoring;
pub mod stubgame;

pub use error::{Error, RemoteError, RemoteErrorKind, Result};
