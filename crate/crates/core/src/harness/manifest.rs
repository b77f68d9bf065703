//! Task files, suite manifests and fixture resolution.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::env::SiteFixture;
use crate::protocol::{check_unique_ids, describe, Task};

pub const FORMAT_VERSION: u32 = 1;

const BUNDLED_FIXTURES: &[(&str, &str)] = &[
    ("shop", include_str!("../../data/fixtures/shop.json")),
    ("cms", include_str!("../../data/fixtures/cms.json")),
    ("gitlab", include_str!("../../data/fixtures/gitlab.json")),
];

const BUNDLED_TASKS: &[&str] = &[
    include_str!("../../data/tasks/shop.json"),
    include_str!("../../data/tasks/cms.json"),
    include_str!("../../data/tasks/gitlab.json"),
];

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFile {
    #[serde(default = "one")]
    pub version: u32,
    pub tasks: Vec<Task>,
}

/// A suite: inline tasks and/or task files, plus fixture locations.
///
/// Relative paths are resolved against the manifest's directory. Fixture
/// ids not listed fall back to the bundled fixtures.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default = "one")]
    pub version: u32,
    #[serde(default)]
    pub fixtures: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub task_files: Vec<PathBuf>,
}

/// Tasks with every referenced fixture loaded.
#[derive(Debug, Clone)]
pub struct Suite {
    pub tasks: Vec<Task>,
    pub fixtures: BTreeMap<String, Arc<SiteFixture>>,
}

impl Suite {
    pub fn fixture_for(&self, task: &Task) -> Option<Arc<SiteFixture>> {
        self.fixtures.get(&task.env_fixture).cloned()
    }

    /// Keeps at most `per_category` tasks of each site category, chosen
    /// with a seeded generator; original order is preserved.
    pub fn sample(&self, per_category: usize, seed: u64) -> Suite {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut by_category: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, t) in self.tasks.iter().enumerate() {
            by_category.entry(&t.site_category).or_default().push(i);
        }
        let mut keep: Vec<usize> = Vec::new();
        for indices in by_category.values() {
            keep.extend(indices.choose_multiple(&mut rng, per_category).copied());
        }
        keep.sort_unstable();
        Suite {
            tasks: keep.into_iter().map(|i| self.tasks[i].clone()).collect(),
            fixtures: self.fixtures.clone(),
        }
    }
}

fn check_version(what: &str, version: u32) -> Result<(), HarnessError> {
    if version != FORMAT_VERSION {
        return Err(HarnessError::Config(format!("{what}: unsupported version {version}")));
    }
    Ok(())
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

pub fn parse_task_file(text: &str, origin: &str) -> Result<TaskFile, HarnessError> {
    let file: TaskFile =
        serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("{origin}: {e}")))?;
    check_version(origin, file.version)?;
    Ok(file)
}

pub fn load_task_file(path: &Path) -> Result<TaskFile, HarnessError> {
    parse_task_file(&read(path)?, &path.display().to_string())
}

pub fn load_manifest(path: &Path) -> Result<Manifest, HarnessError> {
    let manifest: Manifest = serde_json::from_str(&read(path)?)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    check_version(&path.display().to_string(), manifest.version)?;
    Ok(manifest)
}

pub fn bundled_fixture(id: &str) -> Option<SiteFixture> {
    BUNDLED_FIXTURES
        .iter()
        .find(|(k, _)| *k == id)
        .map(|(_, text)| SiteFixture::parse(text).expect("bundled fixture is valid"))
}

pub fn bundled_fixture_ids() -> impl Iterator<Item = &'static str> {
    BUNDLED_FIXTURES.iter().map(|(k, _)| *k)
}

/// All bundled tasks over the bundled fixtures.
pub fn bundled_suite() -> Suite {
    let tasks = BUNDLED_TASKS
        .iter()
        .flat_map(|text| parse_task_file(text, "bundled tasks").expect("bundled tasks parse").tasks)
        .collect();
    resolve_suite(tasks, &BTreeMap::new(), Path::new(".")).expect("bundled suite resolves")
}

/// Loads the fixtures `tasks` reference: from `paths` (relative to
/// `base`) when listed, else from the bundled set.
pub fn resolve_suite(tasks: Vec<Task>, paths: &BTreeMap<String, PathBuf>, base: &Path) -> Result<Suite, HarnessError> {
    check_unique_ids(&tasks).map_err(|v| HarnessError::Config(describe(&v)))?;
    let mut fixtures = BTreeMap::new();
    for task in &tasks {
        if fixtures.contains_key(&task.env_fixture) {
            continue;
        }
        let fixture = match paths.get(&task.env_fixture) {
            Some(p) => SiteFixture::load(&base.join(p))?,
            None => bundled_fixture(&task.env_fixture).ok_or_else(|| {
                HarnessError::Config(format!(
                    "task {}: unknown fixture `{}`",
                    task.id, task.env_fixture
                ))
            })?,
        };
        if fixture.id != task.env_fixture {
            log::warn!("fixture `{}` declares id `{}`", task.env_fixture, fixture.id);
        }
        fixtures.insert(task.env_fixture.clone(), Arc::new(fixture));
    }
    Ok(Suite { tasks, fixtures })
}

/// Loads a manifest with its task files and fixtures.
pub fn load_suite(path: &Path) -> Result<Suite, HarnessError> {
    let manifest = load_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut tasks = manifest.tasks.clone();
    for file in &manifest.task_files {
        tasks.extend(load_task_file(&base.join(file))?.tasks);
    }
    resolve_suite(tasks, &manifest.fixtures, base)
}

/// Loads a single task file. A fixture is taken from `fixtures/<id>.json`
/// beside the task file or one directory up, else from the bundled set.
pub fn load_task_suite(path: &Path) -> Result<Suite, HarnessError> {
    let file = load_task_file(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut paths = BTreeMap::new();
    for task in &file.tasks {
        let name = format!("{}.json", task.env_fixture);
        let found = [base.join("fixtures").join(&name), base.join("..").join("fixtures").join(&name)]
            .into_iter()
            .find(|p| p.is_file());
        if let Some(p) = found {
            paths.insert(task.env_fixture.clone(), p);
        }
    }
    resolve_suite(file.tasks, &paths, Path::new("."))
}
