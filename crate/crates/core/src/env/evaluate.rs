//! Task success checks over the final answer and page url.

use serde::{Deserialize, Deserializer, Serialize};

use crate::protocol::{Validate, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorKind {
    /// Normalized answer equals one of the expected strings.
    ExactMatch,
    /// Answer contains every expected string.
    MustInclude,
    /// Final url equals one of the expected urls.
    UrlMatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evaluator {
    pub kind: EvaluatorKind,
    #[serde(deserialize_with = "one_or_many")]
    pub expected: Vec<String>,
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

impl Evaluator {
    pub fn exact_match<S: Into<String>>(expected: impl IntoIterator<Item = S>) -> Self {
        Self::of(EvaluatorKind::ExactMatch, expected)
    }

    pub fn must_include<S: Into<String>>(expected: impl IntoIterator<Item = S>) -> Self {
        Self::of(EvaluatorKind::MustInclude, expected)
    }

    pub fn url_match<S: Into<String>>(expected: impl IntoIterator<Item = S>) -> Self {
        Self::of(EvaluatorKind::UrlMatch, expected)
    }

    fn of<S: Into<String>>(kind: EvaluatorKind, expected: impl IntoIterator<Item = S>) -> Self {
        Self {
            kind,
            expected: expected.into_iter().map(Into::into).collect(),
        }
    }
}

impl Validate for Evaluator {
    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        if self.expected.is_empty() {
            out.push(Violation::new(format!("{path}.expected"), "must not be empty"));
        }
        for (i, e) in self.expected.iter().enumerate() {
            if e.trim().is_empty() {
                out.push(Violation::new(format!("{path}.expected[{i}]"), "must not be blank"));
            }
        }
    }
}

/// Lowercases and collapses whitespace runs to single spaces.
pub fn normalize_answer(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

pub fn normalize_url(url: &str) -> &str {
    let url = url.trim();
    url.strip_suffix('/').unwrap_or(url)
}

/// Scores a run given its final answer and final url.
pub fn evaluate(evaluator: &Evaluator, answer: &str, final_url: &str) -> bool {
    match evaluator.kind {
        EvaluatorKind::ExactMatch => {
            let got = normalize_answer(answer);
            evaluator.expected.iter().any(|e| normalize_answer(e) == got)
        }
        EvaluatorKind::MustInclude => {
            let got = normalize_answer(answer);
            evaluator.expected.iter().all(|e| got.contains(&normalize_answer(e)))
        }
        EvaluatorKind::UrlMatch => evaluator
            .expected
            .iter()
            .any(|e| normalize_url(e) == normalize_url(final_url)),
    }
}
