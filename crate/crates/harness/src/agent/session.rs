use std::process::Stdio;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::process::{Child, ChildStdin, Command};
use tokio::sync::mpsc;
use tokio::time::{timeout_at, Instant};

use super::Clock;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("could not start {program}: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no prompt from the game within {waited:?}; output so far: {captured:?}")]
    StartupTimeout { waited: Duration, captured: String },
    #[error("game exited before its first prompt; output: {captured:?}")]
    EndedAtStartup { captured: String },
    #[error("no prompt from the game within {waited:?} after a command; output so far: {captured:?}")]
    TurnTimeout { waited: Duration, captured: String },
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("session is closed")]
    Closed,
    #[error("writing to the game: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// What the game prints when it waits for input, alone at the start of
    /// a line.
    pub prompt_marker: String,
    pub startup_timeout: Duration,
    pub turn_timeout: Duration,
    /// When set, output that stays quiet this long also counts as
    /// complete. For games without a stable prompt.
    pub quiet_period: Option<Duration>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            prompt_marker: ">".into(),
            startup_timeout: Duration::from_secs(10),
            turn_timeout: Duration::from_secs(30),
            quiet_period: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Game,
    Player,
}

/// Raw bytes exchanged with the game, in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub direction: Direction,
    pub text: String,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepResult {
    Continue(String),
    /// The game exited; carries whatever it printed last.
    Ended(String),
}

impl StepResult {
    pub fn output(&self) -> &str {
        match self {
            StepResult::Continue(s) | StepResult::Ended(s) => s,
        }
    }
}

pub struct GameSession {
    child: Option<Child>,
    stdin: Option<ChildStdin>,
    rx: mpsc::UnboundedReceiver<Vec<u8>>,
    pending: Vec<u8>,
    eof: bool,
    banner: String,
    transcript: Vec<TranscriptEntry>,
    config: SessionConfig,
    clock: Arc<dyn Clock>,
}

enum Read {
    Prompt(String),
    Eof(String),
}

impl GameSession {
    /// Starts the game and reads its banner up to the first prompt.
    pub async fn spawn(command: &[String], config: SessionConfig, clock: Arc<dyn Clock>) -> Result<Self, SessionError> {
        let (program, args) = command.split_first().ok_or_else(|| SessionError::Spawn {
            program: String::new(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command line"),
        })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .kill_on_drop(true)
            .spawn()
            .map_err(|source| SessionError::Spawn {
                program: program.clone(),
                source,
            })?;
        let stdin = child.stdin.take();
        let mut stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::unbounded_channel();
        tokio::spawn(async move {
            let mut buf = [0u8; 4096];
            loop {
                match stdout.read(&mut buf).await {
                    Ok(0) | Err(_) => break,
                    Ok(n) => {
                        if tx.send(buf[..n].to_vec()).is_err() {
                            break;
                        }
                    }
                }
            }
        });
        let mut session = GameSession {
            child: Some(child),
            stdin,
            rx,
            pending: Vec::new(),
            eof: false,
            banner: String::new(),
            transcript: Vec::new(),
            config,
            clock,
        };
        let waited = session.config.startup_timeout;
        match session.read_until_prompt(waited).await {
            Some(Read::Prompt(banner)) => {
                session.banner = banner;
                Ok(session)
            }
            Some(Read::Eof(captured)) => {
                session.close().await;
                Err(SessionError::EndedAtStartup { captured })
            }
            None => {
                let captured = String::from_utf8_lossy(&session.pending).into_owned();
                session.close().await;
                Err(SessionError::StartupTimeout { waited, captured })
            }
        }
    }

    pub fn banner(&self) -> &str {
        &self.banner
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn is_open(&self) -> bool {
        self.child.is_some() && !self.eof
    }

    /// Sends one command line and returns the game's answer.
    pub async fn step(&mut self, command: &str) -> Result<StepResult, SessionError> {
        let command = command.trim();
        if command.is_empty() {
            return Err(SessionError::InvalidCommand("command is empty".into()));
        }
        if command.contains(['\n', '\r']) {
            return Err(SessionError::InvalidCommand("command spans several lines".into()));
        }
        if !self.is_open() {
            return Err(SessionError::Closed);
        }
        let line = format!("{command}\n");
        let stdin = self.stdin.as_mut().ok_or(SessionError::Closed)?;
        let t = self.clock.now();
        self.transcript.push(TranscriptEntry {
            direction: Direction::Player,
            text: line.clone(),
            t,
        });
        let write = async {
            stdin.write_all(line.as_bytes()).await?;
            stdin.flush().await
        };
        if let Err(e) = write.await {
            // The game may already be gone; whatever it printed is the answer.
            if e.kind() != std::io::ErrorKind::BrokenPipe {
                return Err(e.into());
            }
        }
        let waited = self.config.turn_timeout;
        match self.read_until_prompt(waited).await {
            Some(Read::Prompt(out)) => Ok(StepResult::Continue(out)),
            Some(Read::Eof(out)) => {
                self.close().await;
                Ok(StepResult::Ended(out))
            }
            None => Err(SessionError::TurnTimeout {
                waited,
                captured: String::from_utf8_lossy(&self.pending).into_owned(),
            }),
        }
    }

    /// Ends the child process. Safe to call more than once.
    pub async fn close(&mut self) {
        self.stdin = None;
        if let Some(mut child) = self.child.take() {
            if tokio::time::timeout(Duration::from_millis(500), child.wait())
                .await
                .is_err()
            {
                let _ = child.kill().await;
            }
        }
    }

    fn record_game(&mut self, bytes: &[u8]) {
        let t = self.clock.now();
        self.transcript.push(TranscriptEntry {
            direction: Direction::Game,
            text: String::from_utf8_lossy(bytes).into_owned(),
            t,
        });
    }

    /// Reads until the marker ends the output, the game exits, or the
    /// deadline passes (`None`).
    async fn read_until_prompt(&mut self, limit: Duration) -> Option<Read> {
        let deadline = Instant::now() + limit;
        loop {
            if let Some(cut) = prompt_end(&self.pending, &self.config.prompt_marker) {
                let raw: Vec<u8> = self.pending.drain(..).collect();
                self.record_game(&raw);
                return Some(Read::Prompt(clean(&raw[..cut])));
            }
            if self.eof {
                let raw: Vec<u8> = self.pending.drain(..).collect();
                if !raw.is_empty() {
                    self.record_game(&raw);
                }
                return Some(Read::Eof(clean(&raw)));
            }
            let wait_until = match self.config.quiet_period {
                Some(q) if !self.pending.is_empty() => deadline.min(Instant::now() + q),
                _ => deadline,
            };
            match timeout_at(wait_until, self.rx.recv()).await {
                Ok(Some(chunk)) => self.pending.extend_from_slice(&chunk),
                Ok(None) => self.eof = true,
                Err(_) if wait_until < deadline => {
                    let raw: Vec<u8> = self.pending.drain(..).collect();
                    self.record_game(&raw);
                    return Some(Read::Prompt(clean(&raw)));
                }
                Err(_) => return None,
            }
        }
    }
}

/// Byte offset where the output proper ends, if the buffer ends with the
/// prompt marker alone on its line (trailing blanks allowed).
fn prompt_end(buf: &[u8], marker: &str) -> Option<usize> {
    if marker.is_empty() {
        return None;
    }
    let mut end = buf.len();
    while end > 0 && matches!(buf[end - 1], b' ' | b'\t') {
        end -= 1;
    }
    let m = marker.as_bytes();
    if end < m.len() || &buf[end - m.len()..end] != m {
        return None;
    }
    let start = end - m.len();
    (start == 0 || buf[start - 1] == b'\n').then_some(start)
}

fn clean(bytes: &[u8]) -> String {
    let s = String::from_utf8_lossy(bytes).replace("\r\n", "\n");
    s.trim_end_matches(['\n', ' ', '\t']).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marker_detection() {
        assert_eq!(prompt_end(b"WELCOME\n>", ">"), Some(8));
        assert_eq!(prompt_end(b"WELCOME\n> ", ">"), Some(8));
        assert_eq!(prompt_end(b">", ">"), Some(0));
        assert_eq!(prompt_end(b"a > b", ">"), None);
        assert_eq!(prompt_end(b"x->", ">"), None);
        assert_eq!(prompt_end(b"WELCOME\n", ">"), None);
        assert_eq!(prompt_end(b"WELCOME\n>", ""), None);
    }
}
