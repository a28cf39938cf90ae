//! An LLM playing a line-oriented text game through a child process.

mod elicit;
mod play;
mod session;
mod turn;

use std::sync::atomic::{AtomicU64, Ordering};

pub use elicit::{elicit_lexicon, parse_definitions, render_table, Elicitation, LexiconElicitation};
pub use play::{play, AbortedTurn, PlayConfig, PlayEnd, Transcript, TranscriptRecord, TranscriptWriter};
pub use session::{Direction, GameSession, SessionConfig, SessionError, StepResult, TranscriptEntry};
pub use turn::{parse_turn, render_turn, AgentTurn};

pub const AGENT_SYSTEM_PROMPT: &str = include_str!("../../assets/agent_system.txt");

/// Source of the `t` stamps in transcripts.
pub trait Clock: Send + Sync {
    fn now(&self) -> f64;
}

/// Seconds since the Unix epoch.
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> f64 {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0)
    }
}

/// 0, 1, 2, ... in call order; makes transcripts reproducible.
#[derive(Default)]
pub struct LogicalClock(AtomicU64);

impl Clock for LogicalClock {
    fn now(&self) -> f64 {
        self.0.fetch_add(1, Ordering::SeqCst) as f64
    }
}
