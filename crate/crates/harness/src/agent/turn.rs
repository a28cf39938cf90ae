use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub situation: String,
    pub thought: String,
    pub command: String,
    pub game_output: String,
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Situation,
    Thought,
    Command,
    GameOutput,
}

const LABELS: [(&str, Field); 4] = [
    ("situation:", Field::Situation),
    ("thought:", Field::Thought),
    ("command:", Field::Command),
    ("game output:", Field::GameOutput),
];

/// Splits a line into a field label and the text after it.
fn label(line: &str) -> Option<(Field, &str)> {
    let s = line.trim_start();
    let s = s.strip_prefix('>').unwrap_or(s).trim_start();
    LABELS.iter().find_map(|(name, field)| {
        let head = s.get(..name.len())?;
        head.eq_ignore_ascii_case(name).then(|| (*field, &s[name.len()..]))
    })
}

fn unquote(s: &str) -> &str {
    for (open, close) in [('"', '"'), ('\u{201c}', '\u{201d}')] {
        if let Some(inner) = s.strip_prefix(open).and_then(|r| r.strip_suffix(close)) {
            return inner;
        }
    }
    s
}

/// Extracts the labelled fields from a model reply. Labels may be in any
/// case and order and may follow a `>`; a field runs until the next label.
/// Only the first line of the command counts.
pub fn parse_turn(text: &str) -> Result<AgentTurn> {
    let mut fields: [Option<String>; 4] = Default::default();
    let mut current: Option<usize> = None;
    for line in text.lines() {
        if let Some((field, rest)) = label(line) {
            let i = field as usize;
            if fields[i].is_none() {
                fields[i] = Some(rest.trim().to_string());
                current = Some(i);
                continue;
            }
        }
        if let Some(i) = current {
            let f = fields[i].as_mut().expect("current field exists");
            if !f.is_empty() {
                f.push('\n');
            }
            f.push_str(line.trim());
        }
    }
    let [situation, thought, command, game_output] = fields.map(|f| f.map(|s| s.trim().to_string()));
    let command = command
        .ok_or_else(|| Error::Parse("no COMMAND line".into()))?
        .lines()
        .next()
        .unwrap_or("")
        .trim()
        .to_string();
    if command.is_empty() {
        return Err(Error::Parse("COMMAND is empty".into()));
    }
    let thought = thought.unwrap_or_default();
    Ok(AgentTurn {
        situation: situation.unwrap_or_default(),
        thought: unquote(&thought).to_string(),
        command,
        game_output: game_output.unwrap_or_default(),
    })
}

/// Canonical form: three labelled lines, plus a game-output line when the
/// turn has one.
pub fn render_turn(turn: &AgentTurn) -> String {
    let mut out = format!(
        "SITUATION: {}\nTHOUGHT: \"{}\"\nCOMMAND: {}",
        turn.situation, turn.thought, turn.command
    );
    if !turn.game_output.is_empty() {
        out.push_str("\nGAME OUTPUT: ");
        out.push_str(&turn.game_output);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_reply() {
        let t = parse_turn("SITUATION: S\nTHOUGHT: \"T\"\nCOMMAND: Vorl glauds.").unwrap();
        assert_eq!(
            (t.situation.as_str(), t.thought.as_str(), t.command.as_str()),
            ("S", "T", "Vorl glauds.")
        );
    }

    #[test]
    fn lowercase_and_prompt_prefix() {
        let t = parse_turn(">situation: here\n  thought: hmm\ncommand: look\n").unwrap();
        assert_eq!(t.situation, "here");
        assert_eq!(t.thought, "hmm");
        assert_eq!(t.command, "look");
    }

    #[test]
    fn reordered_and_multiline() {
        let t = parse_turn("Thought: \u{201c}try it\u{201d}\nCOMMAND:   distim gitch  \nand more\nSITUATION: a\nb")
            .unwrap();
        assert_eq!(t.thought, "try it");
        assert_eq!(t.command, "distim gitch");
        assert_eq!(t.situation, "a\nb");
    }

    #[test]
    fn missing_command() {
        assert!(matches!(
            parse_turn("I think I will look around."),
            Err(Error::Parse(_))
        ));
        assert!(matches!(parse_turn("SITUATION: x\nTHOUGHT: y"), Err(Error::Parse(_))));
        assert!(matches!(parse_turn("COMMAND:   "), Err(Error::Parse(_))));
    }

    #[test]
    fn with_game_output() {
        let turn = AgentTurn {
            situation: "s".into(),
            thought: "t".into(),
            command: "Tunik gitch.".into(),
            game_output: "That's not a dape I recognise.".into(),
        };
        let text = render_turn(&turn);
        assert!(text.ends_with("GAME OUTPUT: That's not a dape I recognise."));
        assert_eq!(parse_turn(&text).unwrap(), turn);
    }
}
