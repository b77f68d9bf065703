//! Invariant checking shared by every protocol value.

use std::fmt;

/// A single violated invariant, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// `Ok(())` or every violation found, in traversal order.
pub type ValidationResult = Result<(), Vec<Violation>>;

/// Values with checkable invariants.
///
/// Implementors only provide [`Validate::check`]; `validate` collects
/// the violations into a [`ValidationResult`].
pub trait Validate {
    /// Push every violation found under `path` onto `out`.
    fn check(&self, path: &str, out: &mut Vec<Violation>);

    fn validate(&self) -> ValidationResult {
        let mut out = Vec::new();
        self.check("", &mut out);
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }
}

/// Joins a parent path and a field name.
pub(crate) fn join(path: &str, field: &str) -> String {
    if path.is_empty() {
        field.to_string()
    } else {
        format!("{path}.{field}")
    }
}

pub(crate) fn require_nonempty(path: &str, field: &str, value: &str, out: &mut Vec<Violation>) {
    if value.trim().is_empty() {
        out.push(Violation::new(join(path, field), "must be nonempty"));
    }
}

/// Renders a violation list as one line, for error messages.
pub fn describe(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
