//! Wire formats for scene graphs: the row-oriented TOON text form, the
//! canonical JSON form, and answer-tag extraction from model completions.
//!
//! Parsers never fail outright. They return a [`ParseOutcome`] whose
//! `valid` flag is the reward validity mask.

mod answer;
mod json;
mod toon;

use std::fmt;

use serde::Serialize;

use crate::graph::{validate_graph, SceneGraph, Violation};
use crate::scalar::Scalar;

pub use answer::{extract_answer, find_answer_block, ANSWER_CLOSE, ANSWER_OPEN};
pub use json::{parse_json, parse_json_value, serialize_json};
pub use toon::{canonicalize_relations, parse_toon, serialize_toon, ToonDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    MissingAnswerTags,
    UnexpectedEnd,
    MissingHeader,
    BadHeader,
    FieldCount,
    BadNumber,
    BadField,
    CountMismatch,
    TrailingContent,
    DanglingReference,
    Syntax,
    Validation,
}

/// A parse problem. `line`/`column` are 1-based; `0` means "not tied to a
/// position".
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl Diagnostic {
    pub fn new(
        line: usize,
        column: usize,
        kind: DiagnosticKind,
        message: impl Into<String>,
    ) -> Self {
        Self {
            line,
            column,
            kind,
            message: message.into(),
        }
    }

    pub fn unpositioned(kind: DiagnosticKind, message: impl Into<String>) -> Self {
        Self::new(0, 0, kind, message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(
                f,
                "{}:{}: {:?}: {}",
                self.line, self.column, self.kind, self.message
            )
        } else {
            write!(f, "{:?}: {}", self.kind, self.message)
        }
    }
}

/// Result of parsing untrusted text.
///
/// `graph` holds a best-effort reconstruction whenever the overall layout
/// could be recognized, even if the graph is invalid; `valid` is true iff
/// there are no diagnostics and the graph passes structural validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParseOutcome<T> {
    pub graph: Option<SceneGraph<T>>,
    pub valid: bool,
    pub diagnostics: Vec<Diagnostic>,
    /// Whether an answer-tag pair was found; `None` when tags were not
    /// looked for.
    pub has_answer_tags: Option<bool>,
}

impl<T: Scalar> ParseOutcome<T> {
    /// Runs structural validation on `graph` and folds violations into the
    /// diagnostics.
    pub(crate) fn finish(graph: Option<SceneGraph<T>>, mut diagnostics: Vec<Diagnostic>) -> Self {
        if let Some(g) = &graph {
            for v in validate_graph(g, None, false).violations {
                let kind = match v {
                    Violation::DanglingReference { .. } => DiagnosticKind::DanglingReference,
                    _ => DiagnosticKind::Validation,
                };
                diagnostics.push(Diagnostic::unpositioned(kind, v.to_string()));
            }
        }
        let valid = graph.is_some() && diagnostics.is_empty();
        Self {
            graph,
            valid,
            diagnostics,
            has_answer_tags: None,
        }
    }

    pub fn failure(diagnostic: Diagnostic) -> Self {
        Self {
            graph: None,
            valid: false,
            diagnostics: vec![diagnostic],
            has_answer_tags: None,
        }
    }

    /// The binary validity mask as a number.
    pub fn mask(&self) -> u8 {
        u8::from(self.valid)
    }

    /// The graph if and only if the outcome is valid.
    pub fn valid_graph(&self) -> Option<&SceneGraph<T>> {
        self.graph.as_ref().filter(|_| self.valid)
    }

    pub fn has(&self, kind: DiagnosticKind) -> bool {
        self.diagnostics.iter().any(|d| d.kind == kind)
    }
}
