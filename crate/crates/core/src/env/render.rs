//! Page state to accessibility-tree text.
//!
//! Nodes are flattened in document order and numbered 1..N per render, so
//! an unchanged page always yields the same ids. One line per visible
//! node: `[<id>] <role> '<label>'`, indented two spaces per depth.

use std::collections::BTreeMap;

use super::fixture::{render_label, Behavior, Condition, Entity, Listing, PageNode, SiteFixture, SortOrder, SortSpec};

/// Default number of nodes shown per observation.
pub const DEFAULT_WINDOW: usize = 120;

#[derive(Debug, Clone, PartialEq)]
pub enum PageRef {
    Static(String),
    Detail { kind: String, id: String },
    Search { kind: String, query: String },
}

/// One history entry: a page plus its interactive state.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub url: String,
    pub page: PageRef,
    pub sort: Option<SortSpec>,
    pub filters: Vec<Condition>,
    pub scroll_offset: usize,
    pub inputs: BTreeMap<u32, String>,
}

impl View {
    pub fn new(url: String, page: PageRef) -> Self {
        Self {
            url,
            page,
            sort: None,
            filters: Vec::new(),
            scroll_offset: 0,
            inputs: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedNode {
    pub id: u32,
    pub depth: usize,
    pub role: String,
    pub label: String,
    pub behavior: Option<Behavior>,
}

struct Builder<'a> {
    fixture: &'a SiteFixture,
    view: &'a View,
    nodes: Vec<RenderedNode>,
}

impl Builder<'_> {
    fn push(&mut self, depth: usize, role: &str, label: String, behavior: Option<Behavior>) {
        let id = self.nodes.len() as u32 + 1;
        self.nodes.push(RenderedNode {
            id,
            depth,
            role: role.to_string(),
            label,
            behavior,
        });
    }

    fn node(&mut self, node: &PageNode, depth: usize) {
        self.push(depth, &node.role, node.label.clone(), node.behavior.clone());
        if let Some(listing) = &node.listing {
            self.items(listing, depth + 1, None);
        }
        for child in &node.children {
            self.node(child, depth + 1);
        }
    }

    fn items(&mut self, listing: &Listing, depth: usize, query: Option<&str>) {
        let Some(kind) = self.fixture.kinds.get(&listing.kind) else {
            return;
        };
        let sort = self.view.sort.as_ref().or(listing.sort.as_ref());
        let selected = select_entities(self.fixture, listing, &self.view.filters, sort, query);
        for entity in selected {
            self.push(
                depth,
                "listitem",
                render_label(&kind.item_label, entity),
                Some(Behavior::Navigate(kind.detail_url_for(&entity.id))),
            );
        }
    }
}

/// Entities shown by a listing under the view's filters and sort.
///
/// Order is the fixture order, stably sorted; entities missing the sort
/// field go last.
pub fn select_entities<'a>(
    fixture: &'a SiteFixture,
    listing: &Listing,
    filters: &[Condition],
    sort: Option<&SortSpec>,
    query: Option<&str>,
) -> Vec<&'a Entity> {
    let needle = query.map(|q| q.trim().to_lowercase());
    let mut selected: Vec<&Entity> = fixture
        .entities
        .iter()
        .filter(|e| e.kind == listing.kind)
        .filter(|e| listing.filter.iter().all(|c| c.holds(e)))
        .filter(|e| filters.iter().all(|c| c.holds(e)))
        .filter(|e| needle.as_ref().is_none_or(|n| e.name.to_lowercase().contains(n.as_str())))
        .collect();
    if let Some(spec) = sort {
        selected.sort_by(|a, b| match (a.field(&spec.field), b.field(&spec.field)) {
            (Some(x), Some(y)) => {
                let ord = super::fixture::compare_values(&x, &y);
                match spec.order {
                    SortOrder::Asc => ord,
                    SortOrder::Desc => ord.reverse(),
                }
            }
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        });
    }
    selected
}

pub(crate) fn build_nodes(fixture: &SiteFixture, view: &View) -> Vec<RenderedNode> {
    let mut b = Builder {
        fixture,
        view,
        nodes: Vec::new(),
    };
    for node in &fixture.layout {
        b.node(node, 0);
    }
    match &view.page {
        PageRef::Static(key) => {
            if let Some(page) = fixture.pages.get(key) {
                for node in &page.nodes {
                    b.node(node, 0);
                }
            }
        }
        PageRef::Detail { kind, id } => {
            if let Some(entity) = fixture.entity(kind, id) {
                b.push(0, "heading", entity.name.clone(), None);
                let fields = fixture.kinds.get(kind).map(|k| k.detail_fields.clone()).unwrap_or_default();
                for field in fields {
                    if let Some(v) = entity.field(&field) {
                        b.push(0, "text", format!("{field}: {}", super::fixture::display_value(&v)), None);
                    }
                }
                if !entity.reviews.is_empty() {
                    b.push(0, "list", format!("Reviews ({})", entity.reviews.len()), None);
                    for r in &entity.reviews {
                        b.push(1, "listitem", format!("{} rated {}: {}", r.author, r.rating, r.text), None);
                    }
                }
            }
        }
        PageRef::Search { kind, query } => {
            let listing = Listing {
                kind: kind.clone(),
                filter: Vec::new(),
                sort: None,
            };
            let count = select_entities(fixture, &listing, &view.filters, None, Some(query)).len();
            b.push(0, "heading", format!("Search results for '{query}'"), None);
            if count == 0 {
                b.push(0, "text", "Your search returned no results.".into(), None);
            } else {
                b.push(0, "text", format!("{count} items found"), None);
                let keys = fixture.kinds.get(kind).map(|k| k.sort_keys.clone()).unwrap_or_default();
                for key in keys {
                    for (order, word) in [(SortOrder::Asc, "ascending"), (SortOrder::Desc, "descending")] {
                        b.push(
                            0,
                            "button",
                            format!("Sort by {} {word}", key.replace('_', " ")),
                            Some(Behavior::Sort(SortSpec {
                                field: key.clone(),
                                order,
                            })),
                        );
                    }
                }
                b.push(0, "list", "Results".into(), None);
                b.items(&listing, 1, Some(query));
            }
        }
    }
    b.nodes
}

/// Renders the nodes in `[offset, offset + window)`, with markers for
/// nodes hidden above or below the window.
pub fn render_axtree(nodes: &[RenderedNode], offset: usize, window: usize) -> String {
    let mut lines = Vec::new();
    let start = offset.min(nodes.len());
    let end = (start + window).min(nodes.len());
    if start > 0 {
        lines.push(format!("... {start} nodes above (scroll up to see more)"));
    }
    for n in &nodes[start..end] {
        lines.push(format!("{}[{}] {} '{}'", "  ".repeat(n.depth), n.id, n.role, n.label));
    }
    if end < nodes.len() {
        lines.push(format!("... {} more nodes below (scroll down to see more)", nodes.len() - end));
    }
    lines.join("\n")
}
