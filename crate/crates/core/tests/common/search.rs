//! Search augmentation under arbitrary provider output.

use std::cell::Cell;
use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use coact::llm::{ProviderError, RetrievalProvider, Snippet};
use coact::orchestrator::{RunOptions, RunResult, Termination};
use coact::transcript::EventKind;

use super::envgen::seed_bytes;
use super::scenarios::{options, run_with, scenario};

struct Fixed(Vec<Snippet>);

impl RetrievalProvider for Fixed {
    fn search(&self, _query: &str) -> Result<Vec<Snippet>, ProviderError> {
        Ok(self.0.clone())
    }
}

struct Broken;

impl RetrievalProvider for Broken {
    fn search(&self, _query: &str) -> Result<Vec<Snippet>, ProviderError> {
        Err(ProviderError("search service down".into()))
    }
}

fn words(text: &str) -> usize {
    text.split(char::is_whitespace).filter(|w| !w.is_empty()).count()
}

fn snippet() -> impl Strategy<Value = Snippet> {
    let word = "[a-zA-Z0-9.,]{1,8}";
    let gap = prop_oneof![Just(" "), Just("  "), Just("\n"), Just("\t"), Just(" \u{a0}")];
    (prop::collection::vec((word, gap), 0..260), "[a-z]{1,10}").prop_map(|(parts, source)| Snippet {
        text: parts.into_iter().map(|(w, g)| format!("{w}{g}")).collect(),
        source,
    })
}

fn augmented(provider: Arc<dyn RetrievalProvider>) -> RunResult {
    let s = scenario("happy");
    let options = RunOptions {
        augment_search: true,
        search: Some(provider),
        ..options(&s)
    };
    run_with(&s, &options)
}

fn plan_prompt(result: &RunResult) -> &str {
    result
        .events
        .iter()
        .find_map(|e| match &e.kind {
            EventKind::LlmCall(c) if c.action == "global_plan" => Some(c.prompt.as_str()),
            _ => None,
        })
        .expect("a planning call")
}

/// Injected passages stay within 100 words and appear in the planning prompt.
pub fn check_passage_cap(cases: u32, seed: u64) -> Result<u32, String> {
    let mut config = Config::with_cases(cases);
    config.failure_persistence = None;
    let mut runner = TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &seed_bytes(seed)));
    let n = Cell::new(0);
    runner
        .run(&prop::collection::vec(snippet(), 0..4), |snippets| {
            n.set(n.get() + 1);
            let result = augmented(Arc::new(Fixed(snippets.clone())));
            let passages = &result.header.passages;
            let nonblank = snippets.iter().filter(|s| !s.text.trim().is_empty()).count();
            prop_assert_eq!(passages.len(), nonblank);
            let prompt = plan_prompt(&result);
            for p in passages {
                prop_assert!(words(&p.passage) <= 100, "{} words", words(&p.passage));
                prop_assert!(prompt.contains(p.passage.trim()));
            }
            for (p, s) in passages.iter().zip(snippets.iter().filter(|s| !s.text.trim().is_empty())) {
                prop_assert!(s.text.starts_with(&p.passage));
                if words(&s.text) <= 100 {
                    prop_assert_eq!(&p.passage, &s.text);
                }
            }
            prop_assert!(result.outcome.success);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(n.get())
}

/// A failing provider leaves planning unaffected.
pub fn check_provider_failure() -> Result<(), String> {
    let result = augmented(Arc::new(Broken));
    if !result.header.passages.is_empty() {
        return Err("passages from a failed provider".into());
    }
    if plan_prompt(&result).contains("RETRIEVED INFORMATION") {
        return Err("empty retrieval block injected".into());
    }
    if result.outcome.termination != Termination::Completed || !result.outcome.success {
        return Err(format!("run did not complete: {:?}", result.outcome));
    }
    Ok(())
}
