mod common;

use std::sync::Arc;

use common::scenarios::{check_replay, run, scenario, scenarios};
use coact::harness::{bundled_fixture, recorded_outcome, replay, ReplayError};
use coact::orchestrator::Termination;
use coact::prompts::PromptSet;
use coact::transcript::{read_transcript, EventKind};

fn prompts() -> Arc<PromptSet> {
    Arc::new(PromptSet::bundled())
}

#[test]
fn every_scenario_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    for s in scenarios() {
        check_replay(&s, dir.path()).unwrap();
    }
}

fn record(name: &str, dir: &std::path::Path) -> coact::transcript::TranscriptFile {
    let path = dir.join(format!("{name}.jsonl"));
    run(&scenario(name), Some(Box::new(std::fs::File::create(&path).unwrap())));
    read_transcript(&path).unwrap()
}

#[test]
fn force_stopped_run_replays_to_the_same_count() {
    let dir = tempfile::tempdir().unwrap();
    let file = record("force_stop", dir.path());
    let outcome = replay(&file, Arc::new(bundled_fixture("shop").unwrap()), prompts()).unwrap();
    assert_eq!(outcome.termination, Termination::ForceStopped);
    assert_eq!(outcome.exchanges_used, 4);
    assert_eq!(Some(outcome), recorded_outcome(&file));
}

#[test]
fn edited_fixture_diverges() {
    let dir = tempfile::tempdir().unwrap();
    let file = record("happy", dir.path());
    let mut fixture = bundled_fixture("shop").unwrap();
    let peeler = fixture.entities.iter_mut().find(|e| e.name.contains("Peeler")).unwrap();
    peeler.name = "OXO Peeler Deluxe".into();
    match replay(&file, Arc::new(fixture), prompts()) {
        Err(ReplayError::Divergence { seq }) => {
            // the first prompt that shows Kitchen products is the pass check
            match &file.events[seq as usize].kind {
                EventKind::LlmCall(call) => assert_eq!(call.action, "pass_check"),
                other => panic!("diverged on {other:?}"),
            }
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn edited_prompt_diverges_at_the_first_call() {
    let dir = tempfile::tempdir().unwrap();
    let file = record("local_revise", dir.path());
    let mut set = PromptSet::bundled();
    set.set("global_plan", "Plan it.");
    assert!(matches!(
        replay(&file, Arc::new(bundled_fixture("shop").unwrap()), Arc::new(set)),
        Err(ReplayError::Divergence { seq: 0 })
    ));
}

#[test]
fn truncated_transcript_is_readable_but_not_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("happy.jsonl");
    run(&scenario("happy"), Some(Box::new(std::fs::File::create(&path).unwrap())));
    let text = std::fs::read_to_string(&path).unwrap();
    let cut = text.trim_end().rfind('\n').unwrap() + 20;
    std::fs::write(&path, &text[..cut]).unwrap();
    let file = read_transcript(&path).unwrap();
    assert_eq!(file.warnings.len(), 1);
    assert!(file.result().is_none());
    assert!(matches!(
        replay(&file, Arc::new(bundled_fixture("shop").unwrap()), prompts()),
        Err(ReplayError::Incomplete)
    ));
}
