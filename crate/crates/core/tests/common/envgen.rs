//! Random fixtures and a brute-force model of what their pages show.

use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use serde_json::json;

use coact::env::{EnvConfig, SiteFixture, WebEnv};
use coact::protocol::PageAction;

const WORDS: &[&str] = &["red", "blue", "steel", "oak", "mini", "pro", "lamp", "chair", "cup", "pan"];

#[derive(Debug, Clone)]
pub struct Item {
    pub name: String,
    pub price_cents: u32,
    pub rating: u8,
}

#[derive(Debug, Clone)]
pub enum Step {
    Sort { field: &'static str, desc: bool },
    Filter,
    Clear,
    Search(String),
    Back,
}

#[derive(Debug, Clone)]
pub struct Case {
    pub items: Vec<Item>,
    pub threshold_cents: u32,
    pub steps: Vec<Step>,
}

fn item() -> impl Strategy<Value = Item> {
    (0..WORDS.len(), 0..WORDS.len(), 0u32..2000, 1u8..=5).prop_map(|(a, b, p, r)| Item {
        name: format!("{} {}", WORDS[a], WORDS[b]),
        // a few shared prices exercise stable ordering of ties
        price_cents: 100 + (p % 40) * 25,
        rating: r,
    })
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        (prop_oneof![Just("price"), Just("rating")], any::<bool>()).prop_map(|(field, desc)| Step::Sort { field, desc }),
        Just(Step::Filter),
        Just(Step::Clear),
        prop_oneof![(0..WORDS.len()).prop_map(|i| WORDS[i].to_string()), "[a-z]{1,3}"].prop_map(Step::Search),
        Just(Step::Back),
    ]
}

pub fn case() -> impl Strategy<Value = Case> {
    (prop::collection::vec(item(), 0..20), 100u32..1100, prop::collection::vec(step(), 1..12)).prop_map(
        |(mut items, threshold_cents, steps)| {
            // unique names make list comparison unambiguous
            for (i, it) in items.iter_mut().enumerate() {
                it.name = format!("{} {i}", it.name);
            }
            Case {
                items,
                threshold_cents,
                steps,
            }
        },
    )
}

fn dollars(cents: u32) -> f64 {
    cents as f64 / 100.0
}

pub fn fixture(case: &Case) -> SiteFixture {
    let entities: Vec<_> = case
        .items
        .iter()
        .enumerate()
        .map(|(i, it)| {
            json!({"id": format!("e{i}"), "kind": "item", "name": it.name,
                   "fields": {"price": dollars(it.price_cents), "rating": it.rating}})
        })
        .collect();
    let doc = json!({
        "id": "random",
        "start_url": "http://r/",
        "layout": [{"role": "textbox", "label": "Search",
                    "behavior": {"submit": {"kind": "item", "results_url": "http://r/search"}}}],
        "pages": {"http://r/": {"title": "Items", "nodes": [
            {"role": "button", "label": "Sort by price ascending", "behavior": {"sort": {"field": "price", "order": "asc"}}},
            {"role": "button", "label": "Sort by price descending", "behavior": {"sort": {"field": "price", "order": "desc"}}},
            {"role": "button", "label": "Sort by rating ascending", "behavior": {"sort": {"field": "rating", "order": "asc"}}},
            {"role": "button", "label": "Sort by rating descending", "behavior": {"sort": {"field": "rating", "order": "desc"}}},
            {"role": "button", "label": "Cheap", "behavior": {"filter": {"field": "price", "op": "lt", "value": dollars(case.threshold_cents)}}},
            {"role": "button", "label": "Clear filters", "behavior": "clear_filters"},
            {"role": "list", "label": "Items", "listing": {"kind": "item"}}
        ]}},
        "kinds": {"item": {"detail_url": "http://r/item/{id}", "item_label": "{name}",
                           "detail_fields": ["price"], "sort_keys": ["price", "rating"]}},
        "entities": entities,
    });
    SiteFixture::parse(&doc.to_string()).expect("generated fixture is valid")
}

/// What a page should show, tracked without the environment's code.
#[derive(Debug, Clone)]
struct ModelView {
    query: Option<String>,
    sort: Option<(&'static str, bool)>,
    cheap_only: bool,
}

fn expected_names(case: &Case, view: &ModelView) -> Vec<String> {
    let mut idx: Vec<usize> = (0..case.items.len())
        .filter(|&i| !view.cheap_only || case.items[i].price_cents < case.threshold_cents)
        .filter(|&i| match &view.query {
            Some(q) => case.items[i].name.to_lowercase().contains(&q.trim().to_lowercase()),
            None => true,
        })
        .collect();
    if let Some((field, desc)) = view.sort {
        let key = |i: usize| match field {
            "price" => case.items[i].price_cents,
            _ => case.items[i].rating as u32,
        };
        // insertion sort: stable, and independent of the library sort
        for j in 1..idx.len() {
            let mut k = j;
            while k > 0 {
                let (a, b) = (key(idx[k - 1]), key(idx[k]));
                let out_of_order = if desc { a < b } else { a > b };
                if !out_of_order {
                    break;
                }
                idx.swap(k - 1, k);
                k -= 1;
            }
        }
    }
    idx.into_iter().map(|i| case.items[i].name.clone()).collect()
}

fn node_id(axtree: &str, role: &str, label: &str) -> Option<u32> {
    let needle = format!("] {role} '{label}'");
    axtree.lines().find(|l| l.trim_start().ends_with(&needle)).and_then(|l| {
        let l = l.trim_start();
        l[1..l.find(']')?].parse().ok()
    })
}

fn listed_names(axtree: &str) -> Vec<String> {
    axtree
        .lines()
        .filter_map(|l| l.trim_start().split_once("] listitem '"))
        .map(|(_, rest)| rest.trim_end_matches('\'').to_string())
        .collect()
}

/// Translates a step into an action on the current page, if it applies.
fn action_for(step: &Step, axtree: &str, on_search: bool) -> Option<PageAction> {
    match step {
        Step::Sort { field, desc } => {
            let label = format!("Sort by {field} {}", if *desc { "descending" } else { "ascending" });
            node_id(axtree, "button", &label).map(|id| PageAction::Click { id })
        }
        Step::Filter if !on_search => node_id(axtree, "button", "Cheap").map(|id| PageAction::Click { id }),
        Step::Clear if !on_search => node_id(axtree, "button", "Clear filters").map(|id| PageAction::Click { id }),
        Step::Search(q) => node_id(axtree, "textbox", "Search").map(|id| PageAction::Type { id, text: q.clone() }),
        Step::Back => Some(PageAction::GoBack),
        _ => None,
    }
}

/// Applies the steps, checking every list shown against the model.
/// Returns the observation stream.
pub fn run_case(case: &Case) -> Result<Vec<String>, String> {
    let fixture = Arc::new(fixture(case));
    let (mut env, first) = WebEnv::reset(fixture, EnvConfig { window: 1000 }).map_err(|e| e.to_string())?;
    let mut stream = vec![first.axtree.clone()];
    let mut history: Vec<ModelView> = Vec::new();
    let mut view = ModelView {
        query: None,
        sort: None,
        cheap_only: false,
    };
    let mut axtree = first.axtree;
    for step in &case.steps {
        let on_search = view.query.is_some();
        let Some(action) = action_for(step, &axtree, on_search) else {
            continue;
        };
        let result = env.apply(&action);
        match step {
            Step::Back => match history.pop() {
                Some(prev) => {
                    result.map_err(|e| format!("go_back failed: {e}"))?;
                    view = prev;
                }
                None => {
                    if result.is_ok() {
                        return Err("go_back succeeded with no history".into());
                    }
                    continue;
                }
            },
            _ => {
                result.map_err(|e| format!("{action}: {e}"))?;
                match step {
                    Step::Sort { field, desc } => view.sort = Some((field, *desc)),
                    Step::Filter => view.cheap_only = true,
                    Step::Clear => view.cheap_only = false,
                    Step::Search(q) => {
                        history.push(view.clone());
                        view = ModelView {
                            query: Some(q.clone()),
                            sort: None,
                            cheap_only: false,
                        };
                    }
                    Step::Back => unreachable!(),
                }
            }
        }
        let obs = env.observe();
        let expected = expected_names(case, &view);
        let shown = listed_names(&obs.axtree);
        if shown != expected {
            return Err(format!("after {action}: shown {shown:?}, expected {expected:?}"));
        }
        if let Some(q) = &view.query {
            let count_line = if expected.is_empty() {
                "Your search returned no results.".to_string()
            } else {
                format!("{} items found", expected.len())
            };
            if !obs.axtree.contains(&count_line) {
                return Err(format!("search `{q}`: missing `{count_line}`"));
            }
        }
        axtree = obs.axtree.clone();
        stream.push(obs.axtree);
    }
    Ok(stream)
}

/// Runs `cases` random cases: model agreement, and identical streams on a
/// second run. Returns the number of cases run.
pub fn check_env_oracle(cases: u32, seed: u64) -> Result<u32, String> {
    let mut config = Config::with_cases(cases);
    config.failure_persistence = None;
    let mut runner = TestRunner::new_with_rng(
        config,
        proptest::test_runner::TestRng::from_seed(proptest::test_runner::RngAlgorithm::ChaCha, &seed_bytes(seed)),
    );
    let counter = std::cell::Cell::new(0u32);
    runner
        .run(&case(), |c| {
            counter.set(counter.get() + 1);
            let first = run_case(&c).map_err(TestCaseError::fail)?;
            let second = run_case(&c).map_err(TestCaseError::fail)?;
            prop_assert_eq!(first, second);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(counter.get())
}

pub fn seed_bytes(seed: u64) -> [u8; 32] {
    let mut out = [0u8; 32];
    for (i, chunk) in out.chunks_mut(8).enumerate() {
        chunk.copy_from_slice(&(seed.wrapping_add(i as u64)).to_le_bytes());
    }
    out
}
