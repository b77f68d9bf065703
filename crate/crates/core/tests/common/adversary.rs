//! A randomized scripted backend and the protocol invariants every run
//! against it must satisfy.

use std::sync::Mutex;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coact::harness::bundled_suite;
use coact::llm::{ChatBackend, ChatRequest, LlmError};
use coact::orchestrator::{exchange_bound, run_task, RunOptions, RunResult, Termination};
use coact::protocol::{Budgets, GlobalDecision, VerdictDecision};
use coact::transcript::{check_events, EventKind, TranscriptEvent};

pub const MAX_PHASES: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ask {
    Plan,
    Actions,
    PassCheck,
    FailCheck,
    Decision,
    Guidance,
    Collation,
}

fn classify(request: &ChatRequest) -> Ask {
    let prompt = request.rendered_prompt();
    let last_user = match request.messages.as_slice() {
        [_, .., last] => last.content.as_str(),
        _ => "",
    };
    if last_user.contains("could not be read as a plan") {
        return Ask::Plan;
    }
    if last_user.contains("could not be read as an action sequence") {
        return Ask::Actions;
    }
    if last_user.contains("```revise``` or ```overrule``` on the first line") {
        return Ask::Decision;
    }
    if last_user.contains("could not be read as a decision") {
        return if last_user.contains("move") { Ask::PassCheck } else { Ask::FailCheck };
    }
    let markers = [
        ("Your role is to construct", Ask::Plan),
        ("you have chosen to revise", Ask::Plan),
        ("Start your reply with the chosen action", Ask::Decision),
        ("Give them concrete suggestions", Ask::Guidance),
        ("Your role now involves collating", Ask::Collation),
        ("ensure the successful execution", Ask::PassCheck),
        ("encountered an exception", Ask::FailCheck),
    ];
    for (m, ask) in markers {
        if prompt.contains(m) {
            return ask;
        }
    }
    Ask::Actions
}

pub struct Adversary {
    rng: Mutex<ChaCha8Rng>,
}

impl Adversary {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

const GARBAGE: &[&str] = &[
    "I am not sure what to do here.",
    "Phase 1: | Expected:",
    "**Action 1:** fly [3]",
    "```maybe```",
    "Action: dance\nReasons: none",
    " ",
    "[",
];

fn garbage(rng: &mut ChaCha8Rng) -> String {
    GARBAGE.choose(rng).unwrap().to_string()
}

fn page_action(rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..8) {
        0 | 1 => format!("click [{}]", rng.random_range(1..30)),
        2 => format!("type [2] [{}]", ["sony", "peeler", "shoe", "x"].choose(rng).unwrap()),
        3 => "scroll [down]".into(),
        4 => "scroll [up]".into(),
        5 => "go_back".into(),
        6 => "goto [http://shop.local/products]".into(),
        _ => format!("stop [{}]", ["6", "Adidas", ""].choose(rng).unwrap()),
    }
}

fn verdict(rng: &mut ChaCha8Rng) -> String {
    let token = ["move", "revise", "request"].choose(rng).unwrap();
    match rng.random_range(0..5) {
        0 => format!("```{token}```\nReasons: looks that way"),
        1 => format!("Action: {token}"),
        2 => garbage(rng),
        _ => format!("Action: {token}\nReasons: the page shows something"),
    }
}

impl ChatBackend for Adversary {
    fn id(&self) -> String {
        "adversary".into()
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let mut rng = self.rng.lock().unwrap();
        let rng = &mut *rng;
        if rng.random_bool(0.005) {
            return Err(LlmError::Transport("connection reset".into()));
        }
        let broken = rng.random_bool(0.12);
        let reply = match classify(request) {
            _ if broken => garbage(rng),
            Ask::Plan => {
                let n = rng.random_range(1..=MAX_PHASES);
                (1..=n)
                    .map(|i| format!("Phase {i}: step {i} | Expected: state {i}"))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
            Ask::Actions => {
                let n = rng.random_range(1..=4);
                (1..=n)
                    .map(|i| format!("**Action {i}:** {}", page_action(rng)))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
            Ask::PassCheck | Ask::FailCheck => verdict(rng),
            Ask::Decision => match rng.random_range(0..4) {
                0 => "```revise```\nThe plan is wrong.".into(),
                1 => "```overrule```\nGuidance: try the search box".into(),
                2 => "overrule".into(),
                _ => garbage(rng),
            },
            Ask::Guidance => ["Guidance: scroll down first", "", "no idea"].choose(rng).unwrap().to_string(),
            Ask::Collation => ["Final answer: 6", "done", ""].choose(rng).unwrap().to_string(),
        };
        Ok(reply)
    }
}

pub fn random_budgets(rng: &mut ChaCha8Rng) -> Budgets {
    Budgets {
        max_exchanges: rng.random_range(1..40),
        max_local_revisions_per_phase: rng.random_range(0..4),
        max_replan_requests_per_task: rng.random_range(0..4),
        force_stop_enabled: rng.random_bool(0.6),
    }
}

/// Checks the protocol invariants on one finished run.
pub fn check_invariants(result: &RunResult, budgets: &Budgets) -> Result<(), String> {
    let events = &result.events;
    check_events(events).map_err(|v| format!("{v:?}"))?;
    let used = result.outcome.exchanges_used;
    let limit = if budgets.force_stop_enabled {
        budgets.max_exchanges
    } else {
        exchange_bound(budgets, MAX_PHASES)
    };
    if used > limit {
        return Err(format!("{used} exchanges exceed bound {limit}"));
    }
    let calls = events.iter().filter(|e| matches!(e.kind, EventKind::LlmCall(_))).count() as u32;
    if calls != used {
        return Err(format!("{calls} recorded calls but {used} counted"));
    }
    check_requests_answered(events, &result.outcome.termination)?;
    check_plans(events)?;
    check_fail_never_moves(events)?;
    Ok(())
}

fn check_requests_answered(events: &[TranscriptEvent], termination: &Termination) -> Result<(), String> {
    let interrupted = matches!(termination, Termination::ForceStopped | Termination::ProtocolError(_));
    for (i, e) in events.iter().enumerate() {
        if !matches!(e.kind, EventKind::ReplanRequested { .. }) {
            continue;
        }
        let window = events[i + 1..]
            .iter()
            .take_while(|e| !matches!(e.kind, EventKind::ReplanRequested { .. }));
        let decisions = window.filter(|e| matches!(e.kind, EventKind::DecisionIssued { .. })).count();
        if decisions > 1 || (decisions == 0 && !interrupted) {
            return Err(format!("request at {i} answered by {decisions} decisions"));
        }
    }
    Ok(())
}

/// Plans change only through a revise decision carrying the new plan.
fn check_plans(events: &[TranscriptEvent]) -> Result<(), String> {
    let mut live = None;
    for (i, e) in events.iter().enumerate() {
        if let EventKind::PlanIssued { plan } = &e.kind {
            if live.is_some() {
                match events.get(i.wrapping_sub(1)).map(|e| &e.kind) {
                    Some(EventKind::DecisionIssued {
                        decision: GlobalDecision::Revise { new_plan },
                    }) if new_plan == plan => {}
                    _ => return Err(format!("plan replaced at {i} without a revise decision")),
                }
            }
            live = Some(plan);
        }
        if let EventKind::LlmCall(call) = &e.kind {
            if call.action == "collation" || call.action == "decide" {
                let rendered = live.map(|p| p.render()).unwrap_or_default();
                if !call.prompt.contains(&rendered) {
                    return Err(format!("{} prompt at {i} does not show the live plan", call.action));
                }
            }
        }
    }
    Ok(())
}

fn check_fail_never_moves(events: &[TranscriptEvent]) -> Result<(), String> {
    let mut last_action = "";
    for (i, e) in events.iter().enumerate() {
        match &e.kind {
            EventKind::LlmCall(call) => last_action = &call.action,
            EventKind::VerdictIssued { verdict }
                if last_action.starts_with("false_check") && verdict.decision == VerdictDecision::Move =>
            {
                return Err(format!("false_check produced move at {i}"));
            }
            _ => {}
        }
    }
    Ok(())
}

/// Runs `runs` adversarial tasks; returns the termination histogram.
pub fn check_adversarial(runs: u32, seed: u64) -> Result<[u32; 4], String> {
    let suite = bundled_suite();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = [0u32; 4];
    for run in 0..runs {
        let task = suite.tasks.choose(&mut rng).unwrap().clone();
        let budgets = random_budgets(&mut rng);
        let options = RunOptions {
            budgets,
            ..RunOptions::default()
        };
        let backend = Adversary::new(rng.random());
        let fixture = suite.fixture_for(&task).unwrap();
        let result = run_task(&task, fixture, &backend, &options, None)
            .map_err(|e| format!("run {run} ({}): {e}", task.id))?;
        check_invariants(&result, &budgets).map_err(|e| format!("run {run} ({}, {budgets:?}): {e}", task.id))?;
        hist[match result.outcome.termination {
            Termination::Completed => 0,
            Termination::ForceStopped => 1,
            Termination::BudgetExhausted => 2,
            Termination::ProtocolError(_) => 3,
        }] += 1;
    }
    Ok(hist)
}
