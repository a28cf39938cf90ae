use std::sync::Arc;
use std::time::Duration;

use jabber_harness::agent::{
    elicit_lexicon, play, Direction, GameSession, LogicalClock, PlayConfig, PlayEnd, SessionConfig, SessionError,
    StepResult, TranscriptWriter,
};
use jabber_harness::endpoint::ScriptedChat;
use jabber_harness::Error;

fn stub(args: &[&str]) -> Vec<String> {
    let mut cmd = vec![env!("CARGO_BIN_EXE_stub-game").to_string()];
    cmd.extend(args.iter().map(|s| s.to_string()));
    cmd
}

async fn session(args: &[&str]) -> GameSession {
    GameSession::spawn(&stub(args), SessionConfig::default(), Arc::new(LogicalClock::default()))
        .await
        .unwrap()
}

fn reply(command: &str) -> String {
    format!("SITUATION: I am somewhere.\nTHOUGHT: \"Let me try {command}.\"\nCOMMAND: {command}")
}

#[tokio::test]
async fn banner_up_to_first_prompt() {
    let mut s = session(&["--banner", "WELCOME"]).await;
    assert_eq!(s.banner(), "WELCOME");
    assert_eq!(s.transcript()[0].text, "WELCOME\n>");
    s.close().await;
    s.close().await;
}

#[tokio::test]
async fn spawn_failures() {
    let clock = Arc::new(LogicalClock::default());
    let err = GameSession::spawn(&["/no/such/game".to_string()], SessionConfig::default(), clock.clone())
        .await
        .err()
        .unwrap();
    assert!(matches!(err, SessionError::Spawn { .. }));

    let config = SessionConfig {
        startup_timeout: Duration::from_millis(300),
        ..Default::default()
    };
    let err = GameSession::spawn(&stub(&["--no-prompt", "--banner", "WELCOME"]), config, clock)
        .await
        .err()
        .unwrap();
    match err {
        SessionError::StartupTimeout { captured, .. } => assert_eq!(captured, "WELCOME\n"),
        other => panic!("unexpected {other}"),
    }
}

#[tokio::test]
async fn quiet_period_fallback() {
    let config = SessionConfig {
        quiet_period: Some(Duration::from_millis(200)),
        ..Default::default()
    };
    let mut s = GameSession::spawn(
        &stub(&["--no-prompt", "--banner", "WELCOME"]),
        config,
        Arc::new(LogicalClock::default()),
    )
    .await
    .unwrap();
    assert_eq!(s.banner(), "WELCOME");
    assert_eq!(
        s.step("look").await.unwrap().output().split('.').next(),
        Some("You are in the delcot of tondam, where gitches are fraped")
    );
    s.close().await;
}

#[tokio::test]
async fn steps() {
    let mut s = session(&[]).await;
    assert_eq!(
        s.step("Tunik gitch.").await.unwrap(),
        StepResult::Continue("That's not a dape I recognise.".into())
    );
    assert!(matches!(s.step("  ").await, Err(SessionError::InvalidCommand(_))));
    assert!(matches!(
        s.step("look\nquit").await,
        Err(SessionError::InvalidCommand(_))
    ));
    assert_eq!(s.step("quit").await.unwrap(), StepResult::Ended("Farewell.".into()));
    assert!(matches!(s.step("look").await, Err(SessionError::Closed)));

    let t = s.transcript();
    let dirs: Vec<_> = t.iter().map(|e| e.direction).collect();
    assert_eq!(
        dirs,
        [
            Direction::Game,
            Direction::Player,
            Direction::Game,
            Direction::Player,
            Direction::Game
        ]
    );
    let raw: String = t.iter().map(|e| e.text.as_str()).collect();
    assert!(raw.ends_with(">Tunik gitch.\nThat's not a dape I recognise.\n>quit\nFarewell.\n"));
}

#[tokio::test]
async fn scripted_play_in_order() {
    let mut s = session(&[]).await;
    let llm = ScriptedChat::new(["Vorl glauds.", "look", "Distim gitch."].map(reply));
    let config = PlayConfig {
        max_turns: 3,
        ..Default::default()
    };
    let t = play(&mut s, &llm, &config, &LogicalClock::default(), None)
        .await
        .unwrap();
    let commands: Vec<_> = t.turns.iter().map(|t| t.command.as_str()).collect();
    assert_eq!(commands, ["Vorl glauds.", "look", "Distim gitch."]);
    assert_eq!(t.turns[2].game_output, "You distim one, but it frikes fosken.");
    assert_eq!(t.end, PlayEnd::TurnLimit);

    let calls = llm.calls();
    assert_eq!(calls.len(), 3);
    assert!(calls[0].0.as_deref().unwrap().contains("COMMAND:"));
    assert!(calls[2].1.contains("GAME OUTPUT: Which do you mean"));
}

#[tokio::test]
async fn zero_turns_rejected() {
    let mut s = session(&[]).await;
    let llm = ScriptedChat::new(Vec::<String>::new());
    let config = PlayConfig {
        max_turns: 0,
        ..Default::default()
    };
    let err = play(&mut s, &llm, &config, &LogicalClock::default(), None)
        .await
        .unwrap_err();
    assert!(matches!(err, Error::Input(_)));
}

#[tokio::test]
async fn unreadable_replies_get_one_retry() {
    let mut s = session(&[]).await;
    let llm = ScriptedChat::new([
        "I would like to look around.".to_string(),
        reply("look"),
        "no idea".to_string(),
        "still no idea".to_string(),
        reply("quit"),
    ]);
    let config = PlayConfig {
        max_turns: 5,
        ..Default::default()
    };
    let t = play(&mut s, &llm, &config, &LogicalClock::default(), None)
        .await
        .unwrap();
    assert_eq!(t.turns.len(), 2);
    assert_eq!(t.aborted.len(), 1);
    assert_eq!(t.aborted[0].turn_index, 1);
    assert_eq!(t.end, PlayEnd::GameEnded);
    assert!(llm.calls()[1].1.contains("could not be read"));
}

#[tokio::test]
async fn model_failure_keeps_partial_transcript() {
    let mut s = session(&[]).await;
    let llm = ScriptedChat::new([reply("look")]);
    let config = PlayConfig {
        max_turns: 4,
        ..Default::default()
    };
    let t = play(&mut s, &llm, &config, &LogicalClock::default(), None)
        .await
        .unwrap();
    assert_eq!(t.turns.len(), 1);
    assert!(matches!(t.end, PlayEnd::ModelFailed(_)));
}

#[tokio::test]
async fn replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let clock = Arc::new(LogicalClock::default());
        let mut s = GameSession::spawn(&stub(&[]), SessionConfig::default(), clock.clone())
            .await
            .unwrap();
        let llm = ScriptedChat::new(
            [
                "look",
                "Vorl glauds.",
                "vorl glaud-with-roggler",
                "Tunik gitch.",
                "Distim gitch.",
            ]
            .map(reply),
        );
        let path = dir.path().join(format!("t{run}.jsonl"));
        let mut w = TranscriptWriter::create(&path).unwrap();
        let config = PlayConfig {
            max_turns: 5,
            ..Default::default()
        };
        let t = play(&mut s, &llm, &config, clock.as_ref(), Some(&mut w)).await.unwrap();
        assert_eq!(t.turns.len(), 5);
        s.close().await;
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(String::from_utf8_lossy(&outputs[0]).lines().count(), 5);
}

#[tokio::test]
async fn elicitation() {
    let llm = ScriptedChat::new(["dape: a recognized command\nsome stray remark"]);
    let out = elicit_lexicon(&llm, "That's not a dape I recognise.", &["dape".into(), "jirf".into()])
        .await
        .unwrap();
    assert_eq!(out.definitions.len(), 1);
    assert_eq!(out.definitions[0].word, "dape");
    assert_eq!(out.definitions[0].definition, "a recognized command");
    assert_eq!(out.unparsed, ["some stray remark"]);
    assert_eq!(out.warnings.len(), 1);
    let prompt = &llm.calls()[0].1;
    assert!(prompt.contains("That's not a dape I recognise.") && prompt.contains("jirf"));

    let llm = ScriptedChat::new(["gitch: a creature"]);
    let out = elicit_lexicon(&llm, "A gitch tunks you.", &[]).await.unwrap();
    assert_eq!(out.definitions.len(), 1);
    assert!(llm.calls()[0].1.contains("Choose the invented words"));

    assert!(matches!(elicit_lexicon(&llm, " ", &[]).await, Err(Error::Input(_))));
}
