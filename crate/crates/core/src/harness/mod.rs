//! Suite loading, parallel evaluation, reporting and replay.

mod manifest;
mod replay;
mod report;
mod suite;
mod trace;

use thiserror::Error;

pub use manifest::{
    bundled_fixture, bundled_fixture_ids, bundled_suite, load_manifest, load_suite, load_task_file, load_task_suite,
    parse_task_file, resolve_suite, Manifest, Suite, TaskFile, FORMAT_VERSION,
};
pub use replay::{recorded_outcome, replay, ReplayError};
pub use report::{
    mean_tenths, overall_tenths, render_table, sr_tenths, tenths_to_percent, ConfigEcho, Stats, SuiteReport,
    TableRow, TaskLabels, TerminationCounts, REPORT_VERSION,
};
pub use suite::{read_transcript_dir, report_from_transcripts, run_suite, transcript_path, BackendFactory, ReplayFactory, ScriptedFactory, SharedBackend, SuiteConfig, SuiteRun};
pub use trace::{summarize, summarize_event};

use crate::env::FixtureLoadError;
use crate::transcript::TranscriptError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Fixture(#[from] FixtureLoadError),
    #[error(transparent)]
    Transcript(#[from] TranscriptError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
