//! Parse failures carry a kind, a char offset, and a context excerpt.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParseErrorKind {
    UnknownToken,
    UnbalancedTag,
    TagMismatch,
    MissingStartSignal,
    MissingEndSignal,
    MPromptOutsideGroup,
    MPromptModalityMismatch,
    DuplicateInputAsset,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{kind:?} at char {position}: {context}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Char offset into the input; at most the input length.
    pub position: usize,
    /// Human-readable reason with a short excerpt of the input.
    pub context: String,
}

impl ParseError {
    pub(crate) fn new(kind: ParseErrorKind, position: usize, reason: &str, chars: &[char]) -> Self {
        let position = position.min(chars.len());
        let lo = position.saturating_sub(12);
        let hi = (position + 12).min(chars.len());
        let excerpt: String = chars[lo..hi].iter().collect();
        ParseError {
            kind,
            position,
            context: format!("{reason} near `{excerpt}`"),
        }
    }
}
