//! Site fixtures: the static description of a simulated website.
//!
//! A fixture holds typed entities (products, orders, projects...), static
//! pages built from node trees, and per-kind rules for generated pages
//! (entity detail pages and search results). See `docs/fixture-format.md`
//! for an annotated example.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::llm::SearchEntry;
use crate::protocol::{Validate, Violation};

#[derive(Debug, Error)]
pub enum FixtureLoadError {
    #[error("cannot read fixture {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse fixture: {0}")]
    Parse(String),
    #[error("invalid fixture: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SortSpec {
    pub field: String,
    pub order: SortOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Contains,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub field: String,
    pub op: CmpOp,
    pub value: Value,
}

impl Condition {
    pub fn holds(&self, entity: &Entity) -> bool {
        let Some(actual) = entity.field(&self.field) else {
            return self.op == CmpOp::Ne;
        };
        match self.op {
            CmpOp::Eq => values_equal(&actual, &self.value),
            CmpOp::Ne => !values_equal(&actual, &self.value),
            CmpOp::Contains => display_value(&actual)
                .to_lowercase()
                .contains(&display_value(&self.value).to_lowercase()),
            CmpOp::Lt => compare_values(&actual, &self.value) == Ordering::Less,
            CmpOp::Le => compare_values(&actual, &self.value) != Ordering::Greater,
            CmpOp::Gt => compare_values(&actual, &self.value) == Ordering::Greater,
            CmpOp::Ge => compare_values(&actual, &self.value) != Ordering::Less,
        }
    }
}

/// What clicking (or typing into) a node does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    Navigate(String),
    Sort(SortSpec),
    Filter(Condition),
    ClearFilters,
    /// Typing into the textbox searches entity names of `kind`.
    Submit { kind: String, results_url: String },
}

/// Entities of `kind`, narrowed by `filter`, rendered as list items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Listing {
    pub kind: String,
    #[serde(default)]
    pub filter: Vec<Condition>,
    #[serde(default)]
    pub sort: Option<SortSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageNode {
    pub role: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<PageNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behavior: Option<Behavior>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub listing: Option<Listing>,
}

impl PageNode {
    pub fn new(role: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            role: role.into(),
            label: label.into(),
            children: Vec::new(),
            behavior: None,
            listing: None,
        }
    }

    pub fn with_behavior(mut self, behavior: Behavior) -> Self {
        self.behavior = Some(behavior);
        self
    }

    pub fn with_children(mut self, children: Vec<PageNode>) -> Self {
        self.children = children;
        self
    }

    pub fn with_listing(mut self, listing: Listing) -> Self {
        self.listing = Some(listing);
        self
    }

    fn walk<'a>(&'a self, out: &mut Vec<&'a PageNode>) {
        out.push(self);
        for c in &self.children {
            c.walk(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageSpec {
    pub title: String,
    pub nodes: Vec<PageNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub author: String,
    pub rating: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub kind: String,
    pub name: String,
    #[serde(default)]
    pub fields: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reviews: Vec<Review>,
}

impl Entity {
    /// Field lookup; `id`, `name` and `review_count` are built in.
    pub fn field(&self, name: &str) -> Option<Value> {
        match name {
            "id" => Some(Value::String(self.id.clone())),
            "name" => Some(Value::String(self.name.clone())),
            "review_count" => Some(Value::from(self.reviews.len())),
            other => self.fields.get(other).cloned(),
        }
    }
}

/// Rules for pages generated from entities of one kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityKind {
    /// Detail page url with an `{id}` placeholder.
    pub detail_url: String,
    /// List item label template, e.g. `"{name} | ${price}"`.
    pub item_label: String,
    #[serde(default)]
    pub detail_fields: Vec<String>,
    /// Fields offered as sort buttons on generated search result pages.
    #[serde(default)]
    pub sort_keys: Vec<String>,
}

impl EntityKind {
    pub fn detail_url_for(&self, id: &str) -> String {
        self.detail_url.replace("{id}", id)
    }

    /// The entity id if `url` is one of this kind's detail pages.
    pub fn match_detail_url<'u>(&self, url: &'u str) -> Option<&'u str> {
        let (prefix, suffix) = self.detail_url.split_once("{id}")?;
        let rest = url.strip_prefix(prefix)?;
        let id = rest.strip_suffix(suffix)?;
        (!id.is_empty()).then_some(id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteFixture {
    pub id: String,
    #[serde(default = "one")]
    pub version: u32,
    pub start_url: String,
    /// Nodes prepended to every page, e.g. a site header with search.
    #[serde(default)]
    pub layout: Vec<PageNode>,
    pub pages: BTreeMap<String, PageSpec>,
    #[serde(default)]
    pub kinds: BTreeMap<String, EntityKind>,
    #[serde(default)]
    pub entities: Vec<Entity>,
    /// Knowledge snippets served by the offline search provider.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub search_snippets: Vec<SearchEntry>,
}

fn one() -> u32 {
    1
}

impl SiteFixture {
    pub fn load(path: &Path) -> Result<Self, FixtureLoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| FixtureLoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses and validates a fixture document.
    pub fn parse(text: &str) -> Result<Self, FixtureLoadError> {
        let fixture: SiteFixture = serde_json::from_str(text).map_err(|e| FixtureLoadError::Parse(e.to_string()))?;
        fixture.ensure_valid()?;
        Ok(fixture)
    }

    pub fn ensure_valid(&self) -> Result<(), FixtureLoadError> {
        self.validate()
            .map_err(|v| FixtureLoadError::Invalid(crate::protocol::describe(&v)))
    }

    pub fn entities_of<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Entity> + 'a {
        self.entities.iter().filter(move |e| e.kind == kind)
    }

    pub fn entity(&self, kind: &str, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.kind == kind && e.id == id)
    }

    /// Result pages reachable through a submit behavior: `results_url -> kind`.
    pub fn search_targets(&self) -> BTreeMap<&str, &str> {
        let mut out = BTreeMap::new();
        for node in self.all_nodes() {
            if let Some(Behavior::Submit { kind, results_url }) = &node.behavior {
                out.insert(results_url.as_str(), kind.as_str());
            }
        }
        out
    }

    fn all_nodes(&self) -> Vec<&PageNode> {
        let mut out = Vec::new();
        for n in &self.layout {
            n.walk(&mut out);
        }
        for page in self.pages.values() {
            for n in &page.nodes {
                n.walk(&mut out);
            }
        }
        out
    }
}

impl Validate for SiteFixture {
    fn check(&self, _path: &str, out: &mut Vec<Violation>) {
        if self.id.trim().is_empty() {
            out.push(Violation::new("id", "must be nonempty"));
        }
        if !self.pages.contains_key(&self.start_url) {
            out.push(Violation::new(
                "start_url",
                format!("`{}` is not a page of the fixture", self.start_url),
            ));
        } else if self.layout.is_empty() && self.pages[&self.start_url].nodes.is_empty() {
            out.push(Violation::new("start_url", "start page renders no nodes"));
        }

        for (name, kind) in &self.kinds {
            if !kind.detail_url.contains("{id}") {
                out.push(Violation::new(
                    format!("kinds.{name}.detail_url"),
                    "must contain `{id}`",
                ));
            }
        }

        let mut seen = HashSet::new();
        for (i, e) in self.entities.iter().enumerate() {
            if !self.kinds.contains_key(&e.kind) {
                out.push(Violation::new(
                    format!("entities[{i}].kind"),
                    format!("unknown kind `{}`", e.kind),
                ));
            }
            if e.id.is_empty() || e.name.trim().is_empty() {
                out.push(Violation::new(format!("entities[{i}]"), "id and name must be nonempty"));
            }
            if !seen.insert((e.kind.as_str(), e.id.as_str())) {
                out.push(Violation::new(
                    format!("entities[{i}].id"),
                    format!("duplicate id `{}`", e.id),
                ));
            }
        }

        let targets = self.search_targets();
        for node in self.all_nodes() {
            match &node.behavior {
                Some(Behavior::Navigate(url)) => {
                    if !super::resolves(self, &targets, url) {
                        out.push(Violation::new(
                            format!("node '{}'", node.label),
                            format!("link target `{url}` does not resolve"),
                        ));
                    }
                }
                Some(Behavior::Submit { kind, .. }) => {
                    if node.role != "textbox" {
                        out.push(Violation::new(
                            format!("node '{}'", node.label),
                            "submit behavior requires a textbox",
                        ));
                    }
                    if !self.kinds.contains_key(kind) {
                        out.push(Violation::new(
                            format!("node '{}'", node.label),
                            format!("unknown kind `{kind}`"),
                        ));
                    }
                }
                _ => {}
            }
            if let Some(listing) = &node.listing {
                if !self.kinds.contains_key(&listing.kind) {
                    out.push(Violation::new(
                        format!("node '{}'", node.label),
                        format!("listing of unknown kind `{}`", listing.kind),
                    ));
                }
            }
        }
    }
}

/// Text shown for a field value.
pub fn display_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        _ => None,
    }
}

/// Total order used by sort behaviors: numbers before strings, numbers
/// numerically, strings case-insensitively.
pub fn compare_values(a: &Value, b: &Value) -> Ordering {
    match (as_number(a), as_number(b)) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => {
            let (x, y) = (display_value(a), display_value(b));
            x.to_lowercase().cmp(&y.to_lowercase()).then_with(|| x.cmp(&y))
        }
    }
}

fn values_equal(a: &Value, b: &Value) -> bool {
    match (as_number(a), as_number(b)) {
        (Some(x), Some(y)) => x == y,
        _ => display_value(a).eq_ignore_ascii_case(&display_value(b)),
    }
}

/// Fills `{field}` placeholders from the entity.
pub fn render_label(template: &str, entity: &Entity) -> String {
    let mut out = String::with_capacity(template.len() + 16);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let key = &after[..close];
                match entity.field(key) {
                    Some(v) => out.push_str(&display_value(&v)),
                    None => {
                        out.push('{');
                        out.push_str(key);
                        out.push('}');
                    }
                }
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}
