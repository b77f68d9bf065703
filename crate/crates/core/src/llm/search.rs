//! Search augmentation for planning prompts.
//!
//! Passages are capped at [`MAX_PASSAGE_WORDS`] whitespace-separated words;
//! longer snippets are cut after the last allowed word.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{Validate, Violation};

pub const MAX_PASSAGE_WORDS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievedPassage {
    pub query: String,
    pub passage: String,
    pub source: String,
}

impl Validate for RetrievedPassage {
    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        if word_count(&self.passage) > MAX_PASSAGE_WORDS {
            out.push(Violation::new(
                format!("{path}.passage"),
                format!("exceeds {MAX_PASSAGE_WORDS} words"),
            ));
        }
    }
}

/// Raw provider hit before truncation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snippet {
    pub text: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("retrieval provider failed: {0}")]
pub struct ProviderError(pub String);

pub trait RetrievalProvider: Send + Sync {
    fn search(&self, query: &str) -> Result<Vec<Snippet>, ProviderError>;
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Longest prefix of `text` holding at most `max_words` words.
///
/// Text already within the limit is returned unchanged.
pub fn truncate_words(text: &str, max_words: usize) -> &str {
    let mut words = 0;
    let mut in_word = false;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            in_word = false;
        } else if !in_word {
            if words == max_words {
                return text[..i].trim_end();
            }
            in_word = true;
            words += 1;
        }
    }
    text
}

/// Queries `provider` and returns passages capped at 100 words each.
pub fn augment_with_search(query: &str, provider: &dyn RetrievalProvider) -> Result<Vec<RetrievedPassage>, ProviderError> {
    if query.trim().is_empty() {
        return Err(ProviderError("empty query".into()));
    }
    let snippets = provider.search(query)?;
    Ok(snippets
        .into_iter()
        .filter(|s| !s.text.trim().is_empty())
        .map(|s| RetrievedPassage {
            query: query.to_string(),
            passage: truncate_words(&s.text, MAX_PASSAGE_WORDS).to_string(),
            source: s.source,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchEntry {
    /// Matches when any keyword occurs in the query, case-insensitively.
    pub keywords: Vec<String>,
    pub text: String,
    pub source: String,
}

/// Offline provider backed by keyword-indexed entries.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FixtureSearchProvider {
    pub entries: Vec<SearchEntry>,
    #[serde(default = "default_max_results")]
    pub max_results: usize,
}

fn default_max_results() -> usize {
    3
}

impl FixtureSearchProvider {
    pub fn new(entries: Vec<SearchEntry>) -> Self {
        Self {
            entries,
            max_results: default_max_results(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProviderError(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ProviderError(format!("{}: {e}", path.display())))
    }
}

impl RetrievalProvider for FixtureSearchProvider {
    fn search(&self, query: &str) -> Result<Vec<Snippet>, ProviderError> {
        let q = query.to_lowercase();
        Ok(self
            .entries
            .iter()
            .filter(|e| e.keywords.iter().any(|k| !k.is_empty() && q.contains(&k.to_lowercase())))
            .take(self.max_results)
            .map(|e| Snippet {
                text: e.text.clone(),
                source: e.source.clone(),
            })
            .collect())
    }
}
