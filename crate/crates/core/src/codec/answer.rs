use super::{parse_toon, Diagnostic, DiagnosticKind, ParseOutcome};
use crate::graph::Schema;
use crate::scalar::Scalar;

pub const ANSWER_OPEN: &str = "<answer>";
pub const ANSWER_CLOSE: &str = "</answer>";

/// Contents of the last well-formed `<answer>...</answer>` pair: the last
/// closing tag together with the nearest opening tag before it.
pub fn find_answer_block(completion: &str) -> Option<&str> {
    let close = completion.rfind(ANSWER_CLOSE)?;
    let open = completion[..close].rfind(ANSWER_OPEN)?;
    Some(&completion[open + ANSWER_OPEN.len()..close])
}

/// Extracts the answer block of a completion and parses it as TOON.
pub fn extract_answer<T: Scalar>(completion: &str, schema: Schema) -> ParseOutcome<T> {
    match find_answer_block(completion) {
        Some(body) => {
            let mut out = parse_toon(body, schema);
            out.has_answer_tags = Some(true);
            out
        }
        None => {
            let mut out = ParseOutcome::failure(Diagnostic::unpositioned(
                DiagnosticKind::MissingAnswerTags,
                "no complete <answer>...</answer> block",
            ));
            out.has_answer_tags = Some(false);
            out
        }
    }
}
