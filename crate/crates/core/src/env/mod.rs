//! Deterministic simulated website.
//!
//! [`WebEnv`] owns the browsing state for one task run: current view,
//! back history and the stop answer. Fixtures are immutable and shared.

mod evaluate;
mod fixture;
mod render;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

pub use evaluate::{evaluate, normalize_answer, normalize_url, Evaluator, EvaluatorKind};
pub use fixture::{
    compare_values, display_value, render_label, Behavior, CmpOp, Condition, Entity, EntityKind, FixtureLoadError,
    Listing, PageNode, PageSpec, Review, SiteFixture, SortOrder, SortSpec,
};
pub use render::{render_axtree, select_entities, PageRef, RenderedNode, View, DEFAULT_WINDOW};

use crate::protocol::{Observation, PageAction, ScrollDirection, NO_PREVIOUS_ACTION};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("unknown node id")]
    UnknownNodeId,
    #[error("action not applicable to role")]
    NotApplicable,
    #[error("unknown url")]
    UnknownUrl,
    #[error("environment stopped")]
    Stopped,
    #[error("no previous page")]
    NoHistory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvConfig {
    /// Maximum node lines per observation.
    pub window: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
        }
    }
}

fn trim_slash(url: &str) -> &str {
    url.strip_suffix('/').unwrap_or(url)
}

fn search_url(results_url: &str, query: &str) -> String {
    let encoded: String = url::form_urlencoded::byte_serialize(query.as_bytes()).collect();
    format!("{results_url}?q={encoded}")
}

/// Resolves a url to a page of the fixture, static or generated.
fn resolve_page(fixture: &SiteFixture, targets: &BTreeMap<&str, &str>, url: &str) -> Option<(String, PageRef)> {
    if fixture.pages.contains_key(url) {
        return Some((url.to_string(), PageRef::Static(url.to_string())));
    }
    if let Some(key) = fixture.pages.keys().find(|k| trim_slash(k) == trim_slash(url)) {
        return Some((key.clone(), PageRef::Static(key.clone())));
    }
    for (name, kind) in &fixture.kinds {
        if let Some(id) = kind.match_detail_url(url) {
            if fixture.entity(name, id).is_some() {
                return Some((url.to_string(), PageRef::Detail {
                    kind: name.clone(),
                    id: id.to_string(),
                }));
            }
        }
    }
    if let Some((base, query)) = url.split_once('?') {
        if let Some(kind) = targets.get(base) {
            let q = url::form_urlencoded::parse(query.as_bytes())
                .find(|(k, _)| k == "q")
                .map(|(_, v)| v.into_owned())?;
            return Some((search_url(base, &q), PageRef::Search {
                kind: kind.to_string(),
                query: q,
            }));
        }
    }
    None
}

pub(crate) fn resolves(fixture: &SiteFixture, targets: &BTreeMap<&str, &str>, url: &str) -> bool {
    resolve_page(fixture, targets, url).is_some()
}

/// One browsing session over a fixture.
#[derive(Debug, Clone)]
pub struct WebEnv {
    fixture: Arc<SiteFixture>,
    config: EnvConfig,
    current: View,
    history: Vec<View>,
    stopped: Option<String>,
    previous_action: String,
}

impl WebEnv {
    /// Validates the fixture and opens its start page.
    pub fn reset(fixture: Arc<SiteFixture>, config: EnvConfig) -> Result<(Self, Observation), FixtureLoadError> {
        fixture.ensure_valid()?;
        let start = fixture.start_url.clone();
        let view = View::new(start.clone(), PageRef::Static(start));
        let env = Self {
            fixture,
            config,
            current: view,
            history: Vec::new(),
            stopped: None,
            previous_action: NO_PREVIOUS_ACTION.to_string(),
        };
        let obs = env.observe();
        Ok((env, obs))
    }

    pub fn fixture(&self) -> &SiteFixture {
        &self.fixture
    }

    pub fn url(&self) -> &str {
        &self.current.url
    }

    pub fn view(&self) -> &View {
        &self.current
    }

    pub fn stop_answer(&self) -> Option<&str> {
        self.stopped.as_deref()
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped.is_some()
    }

    /// All nodes of the current page, visible or not.
    pub fn nodes(&self) -> Vec<RenderedNode> {
        render::build_nodes(&self.fixture, &self.current)
    }

    pub fn render(&self) -> String {
        render_axtree(&self.nodes(), self.current.scroll_offset, self.config.window)
    }

    pub fn observe(&self) -> Observation {
        Observation {
            axtree: self.render(),
            url: self.current.url.clone(),
            open_tabs: vec![self.current.url.clone()],
            previous_action: self.previous_action.clone(),
        }
    }

    pub fn apply(&mut self, action: &PageAction) -> Result<Observation, EnvError> {
        if self.stopped.is_some() {
            return Err(EnvError::Stopped);
        }
        match action {
            PageAction::Click { id } => {
                let node = self.visible_node(*id)?;
                match node.behavior {
                    Some(Behavior::Navigate(url)) => self.navigate(&url)?,
                    Some(Behavior::Sort(spec)) => {
                        self.current.sort = Some(spec);
                        self.current.scroll_offset = 0;
                    }
                    Some(Behavior::Filter(cond)) => {
                        self.current
                            .filters
                            .retain(|c| !(c.field == cond.field && c.op == cond.op));
                        self.current.filters.push(cond);
                        self.current.scroll_offset = 0;
                    }
                    Some(Behavior::ClearFilters) => {
                        self.current.filters.clear();
                        self.current.scroll_offset = 0;
                    }
                    // Clicking a textbox only focuses it.
                    Some(Behavior::Submit { .. }) => {}
                    None if node.role == "textbox" || node.role == "button" => {}
                    None => return Err(EnvError::NotApplicable),
                }
            }
            PageAction::Type { id, text } => {
                let node = self.visible_node(*id)?;
                if node.role != "textbox" {
                    return Err(EnvError::NotApplicable);
                }
                self.current.inputs.insert(*id, text.clone());
                if let Some(Behavior::Submit { results_url, .. }) = node.behavior {
                    let url = search_url(&results_url, text);
                    self.navigate(&url)?;
                }
            }
            PageAction::Scroll(direction) => {
                let total = self.nodes().len();
                let window = self.config.window.max(1);
                let offset = &mut self.current.scroll_offset;
                match direction {
                    ScrollDirection::Down if *offset + window < total => *offset += window,
                    ScrollDirection::Down => {}
                    ScrollDirection::Up => *offset = offset.saturating_sub(window),
                }
            }
            PageAction::Goto { url } => self.navigate(url)?,
            PageAction::GoBack => {
                let previous = self.history.pop().ok_or(EnvError::NoHistory)?;
                self.current = previous;
            }
            PageAction::Stop { answer } => self.stopped = Some(answer.clone()),
        }
        self.previous_action = action.to_string();
        Ok(self.observe())
    }

    fn visible_node(&self, id: u32) -> Result<RenderedNode, EnvError> {
        let nodes = self.nodes();
        let start = self.current.scroll_offset;
        let end = start + self.config.window;
        nodes
            .into_iter()
            .enumerate()
            .find(|(i, n)| n.id == id && (start..end).contains(i))
            .map(|(_, n)| n)
            .ok_or(EnvError::UnknownNodeId)
    }

    fn navigate(&mut self, url: &str) -> Result<(), EnvError> {
        let targets = self.fixture.search_targets();
        let (canonical, page) = resolve_page(&self.fixture, &targets, url).ok_or(EnvError::UnknownUrl)?;
        let next = View::new(canonical, page);
        let previous = std::mem::replace(&mut self.current, next);
        self.history.push(previous);
        Ok(())
    }
}
