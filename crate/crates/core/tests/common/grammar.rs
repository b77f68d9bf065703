//! Generators for the plan and action grammars.

use std::cell::Cell;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use coact::executor::{parse_action_plan, parse_verdict};
use coact::planner::{extract_final_answer, parse_decision};
use coact::protocol::{parse_action, parse_global_plan, render_plan_text, GlobalPlan, PageAction, ScrollDirection};

use super::envgen::seed_bytes;

pub fn phase_text() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9 ,'()$-]{0,30}[A-Za-z0-9.]"
}

pub fn plan() -> impl Strategy<Value = GlobalPlan> {
    (prop::collection::vec((phase_text(), phase_text()), 1..7), 1u32..6)
        .prop_map(|(pairs, version)| GlobalPlan::from_pairs(pairs, version))
}

fn line_text(min: usize) -> impl Strategy<Value = String> {
    prop::string::string_regex(&format!("[^\\n\\r]{{{min},24}}")).unwrap()
}

pub fn action() -> impl Strategy<Value = PageAction> {
    prop_oneof![
        any::<u32>().prop_map(|id| PageAction::Click { id }),
        (any::<u32>(), line_text(1)).prop_map(|(id, text)| PageAction::Type { id, text }),
        prop_oneof![Just(ScrollDirection::Up), Just(ScrollDirection::Down)].prop_map(PageAction::Scroll),
        line_text(1)
            .prop_filter("non-blank url", |u| !u.trim().is_empty())
            .prop_map(|url| PageAction::Goto { url }),
        Just(PageAction::GoBack),
        line_text(0).prop_map(|answer| PageAction::Stop { answer }),
    ]
}

fn runner(cases: u32, seed: u64) -> TestRunner {
    let mut config = Config::with_cases(cases);
    config.failure_persistence = None;
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &seed_bytes(seed)))
}

/// parse(render(plan)) == plan.
pub fn plan_round_trips(cases: u32, seed: u64) -> Result<u32, String> {
    let n = Cell::new(0);
    runner(cases, seed)
        .run(&plan(), |p| {
            n.set(n.get() + 1);
            let text = render_plan_text(&p);
            prop_assert_eq!(parse_global_plan(&text, p.plan_version), Ok(p));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(n.get())
}

/// parse(display(action)) == action, alone and inside an action plan.
pub fn action_round_trips(cases: u32, seed: u64) -> Result<u32, String> {
    let n = Cell::new(0);
    runner(cases, seed)
        .run(&prop::collection::vec(action(), 1..6), |seq| {
            n.set(n.get() + 1);
            for a in &seq {
                let parsed = parse_action(&a.to_string());
                prop_assert_eq!(parsed.as_ref(), Ok(a));
            }
            let text: String = seq
                .iter()
                .enumerate()
                .map(|(i, a)| format!("**Action {}:** {a}\n", i + 1))
                .collect();
            let parsed = parse_action_plan(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let stop = seq.iter().position(PageAction::is_stop).map_or(seq.len(), |i| i + 1);
            prop_assert_eq!(parsed.actions, seq[..stop].to_vec());
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(n.get())
}

fn noisy() -> impl Strategy<Value = String> {
    prop_oneof![
        any::<String>(),
        "(Phase|phase|\\*\\*|Action|Expected|\\||:|\\[|\\]|[0-9]|```|move|revise|request|overrule|Guidance|Reasons| |\\n){0,40}",
        action().prop_flat_map(|a| {
            let text = a.to_string();
            let len = text.chars().count();
            (Just(text), 0..len.max(1)).prop_map(|(t, cut)| t.chars().take(cut).collect())
        }),
    ]
}

/// Every parser returns (a value or a typed error) on arbitrary input.
pub fn malformed_never_panics(cases: u32, seed: u64) -> Result<u32, String> {
    let n = Cell::new(0);
    runner(cases, seed)
        .run(&noisy(), |text| {
            n.set(n.get() + 1);
            let _ = parse_action(&text);
            let _ = parse_global_plan(&text, 1);
            let _ = parse_action_plan(&text);
            let _ = parse_verdict(&text, true);
            if let Ok(v) = parse_verdict(&text, false) {
                prop_assert_ne!(v.decision, coact::protocol::VerdictDecision::Move);
            }
            let _ = parse_decision(&text);
            let _ = extract_final_answer(&text);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(n.get())
}
