//! Runs a suite of tasks in parallel and aggregates the outcomes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use super::report::{ConfigEcho, SuiteReport, TaskLabels};
use super::{HarnessError, Suite};
use crate::llm::{ChatBackend, ReplayBackend, ScriptFile, ScriptedBackend};
use crate::orchestrator::{run_task, RunOptions, TaskOutcome, Termination};
use crate::protocol::Task;
use super::recorded_outcome;
use crate::transcript::{read_transcript, TranscriptFile};

/// Supplies a backend for each task run.
pub trait BackendFactory: Send + Sync {
    fn id(&self) -> String;

    fn for_task(&self, task: &Task) -> Result<Box<dyn ChatBackend>, String>;
}

/// One backend shared by every task, e.g. an HTTP endpoint.
pub struct SharedBackend(pub Arc<dyn ChatBackend>);

impl BackendFactory for SharedBackend {
    fn id(&self) -> String {
        self.0.id()
    }

    fn for_task(&self, _task: &Task) -> Result<Box<dyn ChatBackend>, String> {
        Ok(Box::new(self.0.clone()))
    }
}

/// A fresh scripted backend per task from a script file.
pub struct ScriptedFactory(pub ScriptFile);

impl BackendFactory for ScriptedFactory {
    fn id(&self) -> String {
        "scripted".into()
    }

    fn for_task(&self, task: &Task) -> Result<Box<dyn ChatBackend>, String> {
        let script = self
            .0
            .script_for(&task.id)
            .ok_or_else(|| format!("no script for task {}", task.id))?;
        Ok(Box::new(ScriptedBackend::new(script.to_vec())))
    }
}

/// Serves each task from `<dir>/transcripts/<task id>.jsonl` of an
/// earlier suite run.
pub struct ReplayFactory(pub PathBuf);

impl BackendFactory for ReplayFactory {
    fn id(&self) -> String {
        "replay".into()
    }

    fn for_task(&self, task: &Task) -> Result<Box<dyn ChatBackend>, String> {
        let path = transcript_path(&self.0, &task.id);
        let file = read_transcript(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(Box::new(ReplayBackend::from_events(&file.events)))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteConfig {
    pub options: RunOptions,
    /// Worker threads; 0 uses rayon's default.
    pub parallel: usize,
    /// Transcripts go to `<out>/transcripts/<task id>.jsonl`.
    pub out_dir: Option<PathBuf>,
    pub sample: Option<usize>,
    pub seed: u64,
}

#[derive(Debug)]
pub struct SuiteRun {
    pub report: SuiteReport,
    /// Outcomes in suite order.
    pub outcomes: Vec<TaskOutcome>,
    pub tasks: Vec<Task>,
}

impl SuiteRun {
    /// True when no task reached the backend at all.
    pub fn backend_unreachable(&self) -> bool {
        !self.outcomes.is_empty() && self.outcomes.iter().all(outcome_unreachable)
    }
}

fn outcome_unreachable(o: &TaskOutcome) -> bool {
    o.exchanges_used == 0 && matches!(&o.termination, Termination::ProtocolError(d) if d.starts_with("transport error"))
}

pub fn transcript_path(out_dir: &Path, task_id: &str) -> PathBuf {
    let safe: String = task_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    out_dir.join("transcripts").join(format!("{safe}.jsonl"))
}

fn failed(task: &Task, detail: String) -> TaskOutcome {
    log::error!("task {}: {detail}", task.id);
    TaskOutcome {
        task_id: task.id.clone(),
        success: false,
        final_answer: String::new(),
        termination: Termination::ProtocolError(detail),
        exchanges_used: 0,
        plan_versions: 0,
    }
}

fn run_one(task: &Task, suite: &Suite, factory: &dyn BackendFactory, config: &SuiteConfig) -> TaskOutcome {
    let Some(fixture) = suite.fixture_for(task) else {
        return failed(task, format!("fixture `{}` not loaded", task.env_fixture));
    };
    let backend = match factory.for_task(task) {
        Ok(b) => b,
        Err(e) => return failed(task, e),
    };
    let sink: Option<Box<dyn Write + Send>> = match &config.out_dir {
        Some(dir) => match File::create(transcript_path(dir, &task.id)) {
            Ok(f) => Some(Box::new(BufWriter::new(f))),
            Err(e) => return failed(task, format!("cannot create transcript: {e}")),
        },
        None => None,
    };
    match run_task(task, fixture, backend.as_ref(), &config.options, sink) {
        Ok(result) => {
            log::info!(
                "task {}: success={} {:?} in {} exchanges",
                task.id,
                result.outcome.success,
                result.outcome.termination,
                result.outcome.exchanges_used
            );
            result.outcome
        }
        Err(e) => failed(task, e.to_string()),
    }
}

/// Runs every task (or a per-category sample) and builds the report.
///
/// A task that fails to run is recorded as unsuccessful; the suite goes on.
pub fn run_suite(suite: &Suite, factory: &dyn BackendFactory, config: &SuiteConfig) -> Result<SuiteRun, HarnessError> {
    let sampled;
    let suite = match config.sample {
        Some(n) => {
            sampled = suite.sample(n, config.seed);
            &sampled
        }
        None => suite,
    };
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir.join("transcripts"))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallel)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let outcomes: Vec<TaskOutcome> =
        pool.install(|| suite.tasks.par_iter().map(|t| run_one(t, suite, factory, config)).collect());

    let echo = ConfigEcho {
        backend: factory.id(),
        budgets: config.options.budgets,
        temperature: config.options.sampling.temperature,
        augment_search: config.options.augment_search,
        sample: config.sample,
        seed: config.sample.map(|_| config.seed),
    };
    let runs: Vec<(TaskLabels, &TaskOutcome)> = suite.tasks.iter().map(TaskLabels::from).zip(&outcomes).collect();
    let report = SuiteReport::build(&runs, echo);
    if let Some(dir) = &config.out_dir {
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
        std::fs::write(dir.join("report.md"), report.render_markdown())?;
    }
    Ok(SuiteRun {
        report,
        outcomes,
        tasks: suite.tasks.clone(),
    })
}

/// Reads every `*.jsonl` transcript in `dir`, or in `dir/transcripts`
/// when that exists, sorted by file name.
pub fn read_transcript_dir(dir: &Path) -> Result<Vec<TranscriptFile>, HarnessError> {
    let nested = dir.join("transcripts");
    let dir = if nested.is_dir() { nested } else { dir.to_path_buf() };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths.iter().map(|p| Ok(read_transcript(p)?)).collect()
}

/// Builds a report from recorded runs. Unfinished transcripts count as
/// failures with a protocol error.
pub fn report_from_transcripts(files: &[TranscriptFile], backend: &str) -> SuiteReport {
    let outcomes: Vec<TaskOutcome> = files
        .iter()
        .map(|f| {
            recorded_outcome(f).unwrap_or_else(|| TaskOutcome {
                task_id: f.header.task.id.clone(),
                success: false,
                final_answer: String::new(),
                termination: Termination::ProtocolError("transcript has no task result".into()),
                exchanges_used: 0,
                plan_versions: 0,
            })
        })
        .collect();
    let runs: Vec<(TaskLabels, &TaskOutcome)> =
        files.iter().map(|f| TaskLabels::from(&f.header.task)).zip(&outcomes).collect();
    let echo = match files.first() {
        Some(f) => ConfigEcho {
            backend: f.header.backend.clone(),
            budgets: f.header.budgets,
            temperature: f.header.temperature,
            augment_search: f.header.augment_search,
            sample: None,
            seed: None,
        },
        None => ConfigEcho {
            backend: backend.to_string(),
            budgets: Default::default(),
            temperature: crate::llm::DEFAULT_TEMPERATURE,
            augment_search: false,
            sample: None,
            seed: None,
        },
    };
    SuiteReport::build(&runs, echo)
}
