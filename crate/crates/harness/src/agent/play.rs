use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::session::{GameSession, StepResult};
use super::turn::{parse_turn, render_turn, AgentTurn};
use super::{Clock, AGENT_SYSTEM_PROMPT};
use crate::endpoint::ChatModel;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayConfig {
    pub max_turns: usize,
    /// Past turns shown to the model on each call.
    pub context_turns: usize,
    pub system_prompt: String,
}

impl Default for PlayConfig {
    fn default() -> Self {
        PlayConfig {
            max_turns: 20,
            context_turns: 10,
            system_prompt: AGENT_SYSTEM_PROMPT.to_string(),
        }
    }
}

/// One line of the persisted transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub turn_index: usize,
    pub situation: String,
    pub thought: String,
    pub command: String,
    pub game_output: String,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbortedTurn {
    pub turn_index: usize,
    pub reply: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayEnd {
    TurnLimit,
    GameEnded,
    /// The model endpoint failed.
    ModelFailed(String),
    /// The game stopped answering.
    GameFailed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub banner: String,
    pub turns: Vec<AgentTurn>,
    pub aborted: Vec<AbortedTurn>,
    pub end: PlayEnd,
}

impl Transcript {
    /// The game as the model saw it: banner, then one block per turn.
    pub fn text(&self) -> String {
        let mut out = self.banner.clone();
        for turn in &self.turns {
            out.push_str("\n\n>");
            out.push_str(&render_turn(turn));
        }
        out
    }
}

/// JSON Lines sink, flushed after every turn.
pub struct TranscriptWriter {
    file: File,
}

impl TranscriptWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(Error::io(format!("creating {}", path.display())))?;
        Ok(TranscriptWriter { file })
    }

    pub fn write(&mut self, record: &TranscriptRecord) -> Result<()> {
        let mut line = serde_json::to_string(record).expect("records serialize");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(Error::io("writing transcript"))
    }
}

fn context(banner: &str, turns: &[AgentTurn], window: usize) -> String {
    let mut out = String::new();
    out.push_str(banner);
    for turn in &turns[turns.len().saturating_sub(window)..] {
        out.push_str("\n\n>");
        out.push_str(&render_turn(turn));
    }
    out.push_str("\n\nWhat do you do next?");
    out
}

/// On failure, the reply (absent when the call itself failed) and why.
async fn ask(llm: &dyn ChatModel, system: &str, user: &str) -> Result<AgentTurn, (Option<String>, String)> {
    let reply = llm
        .complete(Some(system), user)
        .await
        .map_err(|e| (None, e.to_string()))?;
    parse_turn(&reply).map_err(|e| (Some(reply), e.to_string()))
}

/// Plays until the turn limit, the end of the game, or an error. Errors
/// from the model or the game end the run but still return what was
/// played; unparseable replies get one retry and then forfeit the turn.
pub async fn play(
    session: &mut GameSession,
    llm: &dyn ChatModel,
    config: &PlayConfig,
    clock: &dyn Clock,
    mut sink: Option<&mut TranscriptWriter>,
) -> Result<Transcript> {
    if config.max_turns == 0 {
        return Err(Error::Input("max_turns must be at least 1".into()));
    }
    let mut transcript = Transcript {
        banner: session.banner().to_string(),
        turns: Vec::new(),
        aborted: Vec::new(),
        end: PlayEnd::TurnLimit,
    };
    for turn_index in 0..config.max_turns {
        let user = context(&transcript.banner, &transcript.turns, config.context_turns);
        let parsed = match ask(llm, &config.system_prompt, &user).await {
            Ok(t) => Ok(t),
            Err((Some(_), err)) => {
                let retry = format!(
                    "{user}\n\nYour last reply could not be read ({err}). Answer again with exactly three lines starting SITUATION:, THOUGHT: and COMMAND:."
                );
                ask(llm, &config.system_prompt, &retry).await
            }
            Err(e) => Err(e),
        };
        let mut turn = match parsed {
            Ok(turn) => turn,
            Err((Some(reply), err)) => {
                warn!(turn_index, %err, "reply unreadable twice; turn forfeited");
                transcript.aborted.push(AbortedTurn {
                    turn_index,
                    reply,
                    error: err,
                });
                continue;
            }
            Err((None, err)) => {
                transcript.end = PlayEnd::ModelFailed(err);
                return Ok(transcript);
            }
        };
        let step = match session.step(&turn.command).await {
            Ok(s) => s,
            Err(e) => {
                transcript.end = PlayEnd::GameFailed(e.to_string());
                return Ok(transcript);
            }
        };
        turn.game_output = step.output().to_string();
        if let Some(sink) = sink.as_deref_mut() {
            sink.write(&TranscriptRecord {
                turn_index,
                situation: turn.situation.clone(),
                thought: turn.thought.clone(),
                command: turn.command.clone(),
                game_output: turn.game_output.clone(),
                t: clock.now(),
            })?;
        }
        transcript.turns.push(turn);
        if matches!(step, StepResult::Ended(_)) {
            transcript.end = PlayEnd::GameEnded;
            break;
        }
    }
    Ok(transcript)
}
