use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

/// A located message produced by the parser or the validator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    pub line: usize,
}

impl Diagnostic {
    pub fn error(code: &str, line: usize, message: impl Into<String>) -> Diagnostic {
        Diagnostic { severity: Severity::Error, code: code.to_string(), message: message.into(), line }
    }

    pub fn warning(code: &str, line: usize, message: impl Into<String>) -> Diagnostic {
        Diagnostic { severity: Severity::Warning, code: code.to_string(), message: message.into(), line }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let severity = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "line {}: {}[{}]: {}", self.line, severity, self.code, self.message)
    }
}

/// Renders diagnostics one per line.
pub fn render(diagnostics: &[Diagnostic]) -> String {
    diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")
}

pub mod codes {
    pub const SYNTAX: &str = "syntax";
    pub const UNKNOWN_TOKEN: &str = "unknown-token";
    pub const UNTERMINATED_STRING: &str = "unterminated-string";
    pub const BAD_NUMBER: &str = "bad-number";
    pub const EMPTY_PROGRAM: &str = "empty-program";
    pub const UNDEFINED_VARIABLE: &str = "undefined-variable";
    pub const UNKNOWN_OPERATION: &str = "unknown-operation";
    pub const TYPE_MISMATCH: &str = "type-mismatch";
    pub const ARITY: &str = "arity";
    pub const MISSING_OUTPUT: &str = "missing-output";
    pub const DUPLICATE_OUTPUT: &str = "duplicate-output";
    pub const OUTPUT_AS_INPUT: &str = "output-as-input";
    pub const INPUT_REASSIGNED: &str = "input-reassigned";
    pub const OUTPUT_NOT_LAST: &str = "output-not-last";
    pub const NUMERIC_CONSTRAINT: &str = "numeric-constraint";
    pub const INVALID_ARGUMENT: &str = "invalid-argument";
}
