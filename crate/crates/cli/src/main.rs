//! `coact`: run tasks, suites, replays and reports from the command line.
//!
//! Exit codes: 0 when the run completed (whatever the success rate), 1 on
//! configuration errors, 2 when the backend could not be reached at all.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use coact::harness::{
    bundled_fixture, bundled_suite, load_suite, load_task_suite, read_transcript_dir, render_table, replay,
    report_from_transcripts, run_suite, BackendFactory, ReplayFactory, ScriptedFactory,
    SharedBackend, Suite, SuiteConfig, SuiteRun, TableRow,
};
use coact::llm::{FixtureSearchProvider, HttpBackend, HttpConfig, SamplingSettings, ScriptFile};
use coact::orchestrator::RunOptions;
use coact::prompts::PromptSet;
use coact::env::SiteFixture;
use coact::protocol::Budgets;
use coact::transcript::read_transcript;

#[derive(Parser)]
#[command(name = "coact", version, about = "Two-level planner/executor web agent runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks of one task file.
    Run {
        task_file: PathBuf,
        /// Run only this task.
        #[arg(long)]
        task_id: Option<String>,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Run a suite manifest; `bundled` runs the bundled suite.
    Suite {
        manifest: String,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Re-run a transcript against its fixture and check it reproduces.
    Replay {
        transcript: PathBuf,
        /// Fixture file; defaults to the bundled fixture the task names.
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long)]
        prompts_dir: Option<PathBuf>,
    },
    /// Summarize transcript directories, one table row per directory.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Write report.json and report.md here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `http`, `scripted:<file>` or `replay:<dir>`.
    #[arg(long, default_value = "http")]
    backend: String,
    #[arg(long, default_value_t = Budgets::default().max_exchanges)]
    max_exchanges: u32,
    #[arg(long, overrides_with = "no_force_stop")]
    force_stop: bool,
    /// Let runs continue past --max-exchanges.
    #[arg(long)]
    no_force_stop: bool,
    #[arg(long, default_value_t = Budgets::default().max_local_revisions_per_phase)]
    max_local_revisions: u32,
    #[arg(long, default_value_t = Budgets::default().max_replan_requests_per_task)]
    max_replan_requests: u32,
    #[arg(long, default_value_t = coact::llm::DEFAULT_TEMPERATURE)]
    temperature: f64,
    #[arg(long, overrides_with = "no_augment_search")]
    augment_search: bool,
    #[arg(long)]
    no_augment_search: bool,
    /// Snippet file for search augmentation instead of the fixture's own.
    #[arg(long)]
    search_fixture: Option<PathBuf>,
    /// Concurrent task runs; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    parallel: usize,
    /// Directory for transcripts and reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Keep this many tasks per site category.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory of `<prompt>.txt` files overriding the bundled prompts.
    #[arg(long)]
    prompts_dir: Option<PathBuf>,
}

fn load_prompts(dir: Option<&Path>) -> Result<Arc<PromptSet>> {
    let set = match dir {
        Some(d) => PromptSet::with_overrides(d)?,
        None => PromptSet::bundled(),
    };
    Ok(Arc::new(set))
}

impl RunArgs {
    fn options(&self) -> Result<RunOptions> {
        let budgets = Budgets {
            max_exchanges: self.max_exchanges,
            max_local_revisions_per_phase: self.max_local_revisions,
            max_replan_requests_per_task: self.max_replan_requests,
            force_stop_enabled: !self.no_force_stop,
        };
        if !(0.0..=2.0).contains(&self.temperature) {
            bail!("--temperature must be within 0..=2");
        }
        let search = match &self.search_fixture {
            Some(p) => Some(Arc::new(FixtureSearchProvider::load(p).map_err(|e| anyhow!(e.0))?) as _),
            None => None,
        };
        Ok(RunOptions {
            budgets,
            sampling: SamplingSettings {
                temperature: self.temperature,
                ..SamplingSettings::default()
            },
            prompts: load_prompts(self.prompts_dir.as_deref())?,
            augment_search: self.augment_search && !self.no_augment_search,
            search,
            ..RunOptions::default()
        })
    }

    fn factory(&self) -> Result<Box<dyn BackendFactory>> {
        let spec = self.backend.as_str();
        if spec == "http" {
            let backend = HttpBackend::new(HttpConfig::from_env())?;
            return Ok(Box::new(SharedBackend(Arc::new(backend))));
        }
        if let Some(path) = spec.strip_prefix("scripted:") {
            let script = ScriptFile::load(Path::new(path)).map_err(|e| anyhow!(e))?;
            return Ok(Box::new(ScriptedFactory(script)));
        }
        if let Some(dir) = spec.strip_prefix("replay:") {
            return Ok(Box::new(ReplayFactory(PathBuf::from(dir))));
        }
        bail!("unknown backend `{spec}`; expected http, scripted:<file> or replay:<dir>")
    }

    fn config(&self) -> Result<SuiteConfig> {
        Ok(SuiteConfig {
            options: self.options()?,
            parallel: self.parallel,
            out_dir: self.out.clone(),
            sample: self.sample,
            seed: self.seed,
        })
    }
}

fn execute(suite: &Suite, opts: &RunArgs) -> Result<SuiteRun> {
    let config = opts.config()?;
    let factory = opts.factory()?;
    Ok(run_suite(suite, factory.as_ref(), &config)?)
}

fn print_run(run: &SuiteRun, opts: &RunArgs) -> Result<()> {
    for outcome in &run.outcomes {
        println!("{}", serde_json::to_string(outcome)?);
    }
    print!("{}", run.report.render_markdown());
    if let Some(dir) = &opts.out {
        eprintln!("transcripts in {}", dir.join("transcripts").display());
    }
    Ok(())
}

fn finish(run: &SuiteRun) -> ExitCode {
    if run.backend_unreachable() {
        eprintln!("error: backend unreachable");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}

fn fixture_for_replay(task_fixture: &str, path: Option<&Path>) -> Result<SiteFixture> {
    match path {
        Some(p) => Ok(SiteFixture::load(p)?),
        None => bundled_fixture(task_fixture)
            .ok_or_else(|| anyhow!("no bundled fixture `{task_fixture}`; pass --fixture")),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            task_file,
            task_id,
            opts,
        } => {
            let mut suite = load_task_suite(&task_file)?;
            if let Some(id) = &task_id {
                suite.tasks.retain(|t| &t.id == id);
                if suite.tasks.is_empty() {
                    bail!("no task `{id}` in {}", task_file.display());
                }
            }
            let run = execute(&suite, &opts)?;
            print_run(&run, &opts)?;
            Ok(finish(&run))
        }
        Command::Suite { manifest, opts } => {
            let suite = if manifest == "bundled" {
                bundled_suite()
            } else {
                load_suite(Path::new(&manifest))?
            };
            let run = execute(&suite, &opts)?;
            print_run(&run, &opts)?;
            Ok(finish(&run))
        }
        Command::Replay {
            transcript,
            fixture,
            prompts_dir,
        } => {
            let file = read_transcript(&transcript)?;
            for w in &file.warnings {
                eprintln!("warning: {w}");
            }
            let fixture = fixture_for_replay(&file.header.task.env_fixture, fixture.as_deref())?;
            let prompts = load_prompts(prompts_dir.as_deref())?;
            match replay(&file, Arc::new(fixture), prompts) {
                Ok(outcome) => {
                    println!("{}", serde_json::to_string(&outcome)?);
                    eprintln!("replay matches {} events", file.events.len());
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Report { dirs, out } => {
            let mut rows = Vec::new();
            let mut categories: Vec<String> = Vec::new();
            let mut last = None;
            for dir in &dirs {
                let files = read_transcript_dir(dir).with_context(|| dir.display().to_string())?;
                if files.is_empty() {
                    bail!("no transcripts in {}", dir.display());
                }
                let report = report_from_transcripts(&files, "unknown");
                for c in report.per_category.keys() {
                    if !categories.contains(c) {
                        categories.push(c.clone());
                    }
                }
                let label = dir.file_name().map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
                rows.push(TableRow::from_report(label, &report));
                last = Some(report);
            }
            let table = render_table(&rows, &categories);
            print!("{table}");
            if let (Some(dir), Some(report)) = (out, last) {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("table.md"), &table)?;
                if dirs.len() == 1 {
                    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
                    std::fs::write(dir.join("report.md"), report.render_markdown())?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors; 2 is reserved
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
