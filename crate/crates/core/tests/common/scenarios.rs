//! The bundled scripted scenarios and their expected results.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use coact::harness::{bundled_suite, replay, summarize};
use coact::llm::{ScriptFile, ScriptedBackend};
use coact::orchestrator::{run_task, RunOptions, RunResult, Termination};
use coact::prompts::PromptSet;
use coact::protocol::{Budgets, Task};
use coact::transcript::{check_events, comparable, read_transcript};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub task_id: &'static str,
    pub max_exchanges: u32,
    pub exchanges: u32,
    pub plan_versions: u32,
    pub termination: Termination,
    pub success: bool,
}

pub fn scenarios() -> Vec<Scenario> {
    let s = |name, task_id, max_exchanges, exchanges, plan_versions, termination, success| Scenario {
        name,
        task_id,
        max_exchanges,
        exchanges,
        plan_versions,
        termination,
        success,
    };
    vec![
        s("happy", "shop-m1", 30, 6, 1, Termination::Completed, true),
        s("local_revise", "shop-e1", 30, 6, 1, Termination::Completed, true),
        s("replan", "shop-m1", 30, 8, 2, Termination::Completed, true),
        s("overrule", "shop-m2", 30, 9, 1, Termination::Completed, true),
        s("force_stop", "shop-e1", 4, 4, 1, Termination::ForceStopped, false),
    ]
}

pub fn scenario(name: &str) -> Scenario {
    scenarios().into_iter().find(|s| s.name == name).expect("known scenario")
}

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn script(name: &str) -> ScriptFile {
    ScriptFile::load(&data_dir().join("scenarios").join(format!("{name}.json"))).unwrap()
}

pub fn golden(name: &str) -> String {
    std::fs::read_to_string(data_dir().join("scenarios").join(format!("{name}.trace"))).unwrap()
}

pub fn task(id: &str) -> Task {
    bundled_suite().tasks.into_iter().find(|t| t.id == id).expect("bundled task")
}

pub fn options(s: &Scenario) -> RunOptions {
    RunOptions {
        budgets: Budgets {
            max_exchanges: s.max_exchanges,
            ..Budgets::default()
        },
        ..RunOptions::default()
    }
}

pub fn run(s: &Scenario, sink: Option<Box<dyn Write + Send>>) -> RunResult {
    run_to(s, &options(s), sink)
}

pub fn run_with(s: &Scenario, options: &RunOptions) -> RunResult {
    run_to(s, options, None)
}

fn run_to(s: &Scenario, options: &RunOptions, sink: Option<Box<dyn Write + Send>>) -> RunResult {
    let suite = bundled_suite();
    let task = task(s.task_id);
    let fixture = suite.fixture_for(&task).unwrap();
    let backend = ScriptedBackend::new(script(s.name).script_for(s.task_id).unwrap().to_vec());
    run_task(&task, fixture, &backend, options, sink).unwrap()
}

/// Runs the scenario and compares it with its golden trace and expected
/// outcome.
pub fn check(s: &Scenario) -> Result<Duration, String> {
    let start = Instant::now();
    let result = run(s, None);
    let elapsed = start.elapsed();
    let trace = summarize(&result.events);
    let expected = golden(s.name);
    if trace != expected {
        return Err(format!("{}: trace differs\n--- expected\n{expected}--- actual\n{trace}", s.name));
    }
    let o = &result.outcome;
    if o.exchanges_used != s.exchanges || o.plan_versions != s.plan_versions {
        return Err(format!(
            "{}: {} exchanges / {} plans, expected {} / {}",
            s.name, o.exchanges_used, o.plan_versions, s.exchanges, s.plan_versions
        ));
    }
    if o.termination != s.termination || o.success != s.success {
        return Err(format!("{}: outcome {o:?}", s.name));
    }
    check_events(&result.events).map_err(|v| format!("{}: {v:?}", s.name))?;
    if elapsed >= Duration::from_secs(1) {
        return Err(format!("{}: took {elapsed:?}", s.name));
    }
    Ok(elapsed)
}

/// Runs the scenario writing its transcript under `dir`, then replays the
/// file and compares events and outcome.
pub fn check_replay(s: &Scenario, dir: &Path) -> Result<(), String> {
    let path = dir.join(format!("{}.jsonl", s.name));
    let file = std::fs::File::create(&path).map_err(|e| e.to_string())?;
    let original = run(s, Some(Box::new(file)));
    let recorded = read_transcript(&path).map_err(|e| e.to_string())?;
    if comparable(&recorded.events) != comparable(&original.events) {
        return Err(format!("{}: transcript on disk differs from the run", s.name));
    }
    let fixture = bundled_suite().fixture_for(&original.header.task).unwrap();
    let outcome = replay(&recorded, fixture, Arc::new(PromptSet::bundled())).map_err(|e| format!("{}: {e}", s.name))?;
    if outcome != original.outcome {
        return Err(format!("{}: replay outcome {outcome:?} != {:?}", s.name, original.outcome));
    }
    Ok(())
}
