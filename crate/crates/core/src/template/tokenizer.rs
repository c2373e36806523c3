//! Lossless tokenizer for the signal-token grammar.
//!
//! Bracketed and angled sequences are recognized greedily; anything that
//! does not spell a known token is folded back into the surrounding text
//! run, so concatenating the lexemes of the token stream always
//! reproduces the input exactly. Validation is the parser's job; the
//! tokenizer is total.

use super::types::{Modality, TaskPrompt};

/// Start/end markers of questions and answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Input,
    Out,
    End,
}

impl Signal {
    pub fn token(self) -> &'static str {
        match self {
            Signal::Input => "[INPUT]",
            Signal::Out => "[OUT]",
            Signal::End => "[END]",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Signal(Signal),
    Task(TaskPrompt),
    Begin(Modality),
    End(Modality),
    MPrompt { modality: Modality, index: u32 },
    Text,
}

/// One token with its half-open char span into the source string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Char offset of the first char.
    pub start: usize,
    /// Char offset one past the last char.
    pub end: usize,
}

impl Token {
    pub fn lexeme<'a>(&self, chars: &'a [char]) -> String {
        chars[self.start..self.end].iter().collect()
    }

    pub fn is_blank_text(&self, chars: &[char]) -> bool {
        matches!(self.kind, TokenKind::Text)
            && chars[self.start..self.end].iter().all(|c| c.is_whitespace())
    }
}

/// Try to read `[NAME]` or `[NAME_123]` starting at `pos` (which holds '[').
/// Returns the token and the char offset just past ']'.
fn match_bracket(chars: &[char], pos: usize) -> Option<(TokenKind, usize)> {
    let mut i = pos + 1;
    let name_start = i;
    while i < chars.len() && chars[i].is_ascii_uppercase() {
        i += 1;
    }
    if i == name_start {
        return None;
    }
    let name: String = chars[name_start..i].iter().collect();
    let mut index = None;
    if i < chars.len() && chars[i] == '_' {
        i += 1;
        let digits_start = i;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
        if i == digits_start {
            return None;
        }
        let digits: String = chars[digits_start..i].iter().collect();
        index = Some(digits.parse::<u32>().ok()?);
    }
    if i >= chars.len() || chars[i] != ']' {
        return None;
    }
    let end = i + 1;
    let kind = match index {
        Some(index) => TokenKind::MPrompt {
            modality: Modality::from_name(&name)?,
            index,
        },
        None => match name.as_str() {
            "INPUT" => TokenKind::Signal(Signal::Input),
            "OUT" => TokenKind::Signal(Signal::Out),
            "END" => TokenKind::Signal(Signal::End),
            other => TokenKind::Task(TaskPrompt::from_name(other)?),
        },
    };
    Some((kind, end))
}

/// Try to read `<NAME>` or `</NAME>` starting at `pos` (which holds '<').
fn match_angle(chars: &[char], pos: usize) -> Option<(TokenKind, usize)> {
    let mut i = pos + 1;
    let closing = i < chars.len() && chars[i] == '/';
    if closing {
        i += 1;
    }
    let name_start = i;
    while i < chars.len() && chars[i].is_ascii_uppercase() {
        i += 1;
    }
    if i == name_start || i >= chars.len() || chars[i] != '>' {
        return None;
    }
    let name: String = chars[name_start..i].iter().collect();
    let modality = Modality::from_name(&name)?;
    let kind = if closing {
        TokenKind::End(modality)
    } else {
        TokenKind::Begin(modality)
    };
    Some((kind, i + 1))
}

/// Split a string into tokens. Total: never fails, and the lexemes
/// concatenate back to the input. Adjacent unrecognized characters merge
/// into maximal text runs.
pub fn tokenize(input: &str) -> (Vec<Token>, Vec<char>) {
    let chars: Vec<char> = input.chars().collect();
    let mut tokens = Vec::new();
    let mut text_start: Option<usize> = None;
    let mut i = 0;

    let flush = |tokens: &mut Vec<Token>, text_start: &mut Option<usize>, upto: usize| {
        if let Some(s) = text_start.take() {
            if s < upto {
                tokens.push(Token {
                    kind: TokenKind::Text,
                    start: s,
                    end: upto,
                });
            }
        }
    };

    while i < chars.len() {
        let matched = match chars[i] {
            '[' => match_bracket(&chars, i),
            '<' => match_angle(&chars, i),
            _ => None,
        };
        match matched {
            Some((kind, end)) => {
                flush(&mut tokens, &mut text_start, i);
                tokens.push(Token {
                    kind,
                    start: i,
                    end,
                });
                i = end;
            }
            None => {
                if text_start.is_none() {
                    text_start = Some(i);
                }
                i += 1;
            }
        }
    }
    flush(&mut tokens, &mut text_start, chars.len());
    (tokens, chars)
}
