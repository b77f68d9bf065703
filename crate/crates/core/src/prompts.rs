//! Prompt templates keyed by action name.
//!
//! The bundled set is compiled in from `prompts/*.txt`. A directory of
//! `<key>.txt` files can override any of them. Placeholders are written
//! `{name}` and substituted in a single pass, so braces inside values are
//! never expanded.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

const BUNDLED: &[(&str, &str)] = &[
    ("global_intro", include_str!("../prompts/global_intro.txt")),
    ("global_plan", include_str!("../prompts/global_plan.txt")),
    ("decide", include_str!("../prompts/decide.txt")),
    ("revise", include_str!("../prompts/revise.txt")),
    ("overrule", include_str!("../prompts/overrule.txt")),
    ("collation", include_str!("../prompts/collation.txt")),
    ("local_intro", include_str!("../prompts/local_intro.txt")),
    ("local_plan", include_str!("../prompts/local_plan.txt")),
    ("pass_check", include_str!("../prompts/pass_check.txt")),
    ("false_check", include_str!("../prompts/false_check.txt")),
    ("local_revise", include_str!("../prompts/local_revise.txt")),
    ("overruled", include_str!("../prompts/overruled.txt")),
    ("template", include_str!("../prompts/template.txt")),
    ("repair_plan", include_str!("../prompts/repair_plan.txt")),
    ("repair_decision", include_str!("../prompts/repair_decision.txt")),
    ("repair_actions", include_str!("../prompts/repair_actions.txt")),
    ("repair_verdict", include_str!("../prompts/repair_verdict.txt")),
];

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([a-z_]+)\}").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("missing context field `{0}`")]
    MissingContextField(String),
    #[error("no prompt template named `{0}`")]
    UnknownTemplate(String),
    #[error("cannot read prompt override {path}: {detail}")]
    Override { path: String, detail: String },
}

/// Values for template placeholders.
pub type Vars<'a> = BTreeMap<&'static str, &'a str>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    templates: BTreeMap<String, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::bundled()
    }
}

impl PromptSet {
    pub fn bundled() -> Self {
        Self {
            templates: BUNDLED
                .iter()
                .map(|(k, v)| (k.to_string(), v.trim_end().to_string()))
                .collect(),
        }
    }

    pub fn keys() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(k, _)| *k)
    }

    /// Bundled templates with any `<key>.txt` found in `dir` taking precedence.
    ///
    /// Files whose stem is not a known key are ignored.
    pub fn with_overrides(dir: &Path) -> Result<Self, PromptError> {
        let mut set = Self::bundled();
        for key in Self::keys() {
            let path = dir.join(format!("{key}.txt"));
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Override {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
            log::debug!("prompt `{key}` overridden by {}", path.display());
            set.templates.insert(key.to_string(), text.trim_end().to_string());
        }
        Ok(set)
    }

    pub fn set(&mut self, key: &str, text: impl Into<String>) {
        self.templates.insert(key.to_string(), text.into());
    }

    pub fn get(&self, key: &str) -> Result<&str, PromptError> {
        self.templates
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| PromptError::UnknownTemplate(key.to_string()))
    }

    pub fn render(&self, key: &str, vars: &Vars<'_>) -> Result<String, PromptError> {
        fill(self.get(key)?, vars)
    }
}

/// Substitutes every `{name}` in `template`; a name absent from `vars`
/// is an error.
pub fn fill(template: &str, vars: &Vars<'_>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut last = 0;
    for caps in PLACEHOLDER.captures_iter(template) {
        let whole = caps.get(0).unwrap();
        let name = &caps[1];
        let value = vars
            .get(name)
            .ok_or_else(|| PromptError::MissingContextField(name.to_string()))?;
        out.push_str(&template[last..whole.start()]);
        out.push_str(value);
        last = whole.end();
    }
    out.push_str(&template[last..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_template_is_nonempty() {
        let set = PromptSet::bundled();
        for key in PromptSet::keys() {
            assert!(!set.get(key).unwrap().trim().is_empty(), "{key}");
        }
    }

    #[test]
    fn fill_is_single_pass() {
        let vars = Vars::from([("a", "{b}"), ("b", "x")]);
        assert_eq!(fill("<{a}|{b}>", &vars).unwrap(), "<{b}|x>");
    }

    #[test]
    fn missing_field_is_an_error() {
        assert_eq!(
            fill("reasons: {reasons}", &Vars::new()),
            Err(PromptError::MissingContextField("reasons".into()))
        );
    }

    #[test]
    fn non_placeholder_braces_survive() {
        assert_eq!(fill("{\"k\": 1} {Upper}", &Vars::new()).unwrap(), "{\"k\": 1} {Upper}");
    }

    #[test]
    fn overrides_replace_bundled_text() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("collation.txt"), "Collate: {plan}\n").unwrap();
        std::fs::write(dir.path().join("unrelated.txt"), "ignored").unwrap();
        let set = PromptSet::with_overrides(dir.path()).unwrap();
        assert_eq!(set.get("collation").unwrap(), "Collate: {plan}");
        assert_eq!(set.get("decide").unwrap(), PromptSet::bundled().get("decide").unwrap());
    }
}
