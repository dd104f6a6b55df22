use std::fmt;

use serde::{Deserialize, Serialize};

/// A single broken rule, located by JSON path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.rule, self.path, self.message)
    }
}

/// Violations found by a validator. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, rule: &str, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            rule: rule.to_string(),
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub fn rules(&self) -> Vec<&str> {
        self.violations.iter().map(|v| v.rule.as_str()).collect()
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    /// Aligned plain-text listing, one violation per line.
    pub fn to_table(&self) -> String {
        if self.violations.is_empty() {
            return "no violations\n".to_string();
        }
        let rule_w = self.violations.iter().map(|v| v.rule.len()).max().unwrap_or(4).max(4);
        let path_w = self.violations.iter().map(|v| v.path.len()).max().unwrap_or(4).max(4);
        let mut out = format!("{:<rule_w$}  {:<path_w$}  MESSAGE\n", "RULE", "PATH");
        for v in &self.violations {
            out.push_str(&format!("{:<rule_w$}  {:<path_w$}  {}\n", v.rule, v.path, v.message));
        }
        out
    }
}
