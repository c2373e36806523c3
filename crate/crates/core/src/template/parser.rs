//! Parsers for question and answer strings.
//!
//! Both parsers run on the lossless token stream. They are permissive
//! about whitespace (text fields are trimmed at the ends, interiors kept
//! verbatim) and never panic on arbitrary input.

use super::error::{ParseError, ParseErrorKind};
use super::tokenizer::{tokenize, Signal, Token, TokenKind};
use super::types::{AnswerMessage, InputAsset, Modality, ModalityGroup, QuestionMessage};

/// Extract the id from a wrapper body of the exact form `{asset:<id>}`.
fn asset_ref_of(text: &str) -> Option<&str> {
    let t = text.trim();
    let inner = t.strip_prefix("{asset:")?.strip_suffix('}')?;
    if inner.is_empty() || inner.contains(['{', '}']) {
        return None;
    }
    Some(inner)
}

fn join_text(buf: &[String]) -> String {
    buf.concat().trim().to_string()
}

/// Parse `[INPUT] [task] [<X>{asset:ref}</X>] instruction`.
///
/// Everything after the task prompt that is not the (single) asset
/// wrapper becomes the instruction, including any balanced tags or
/// signal-like tokens embedded in it — those occur legitimately in
/// specific-multimodal questions that quote an answer skeleton.
pub fn parse_question(input: &str) -> Result<QuestionMessage, ParseError> {
    let (tokens, chars) = tokenize(input);
    let mut iter = tokens.iter().enumerate().peekable();

    let mut first_significant = None;
    for (i, tok) in iter.by_ref() {
        if tok.is_blank_text(&chars) {
            continue;
        }
        first_significant = Some((i, tok));
        break;
    }
    match first_significant {
        Some((_, tok)) if tok.kind == TokenKind::Signal(Signal::Input) => {}
        Some((_, tok)) => {
            return Err(ParseError::new(
                ParseErrorKind::MissingStartSignal,
                tok.start,
                "question must begin with [INPUT]",
                &chars,
            ))
        }
        None => {
            return Err(ParseError::new(
                ParseErrorKind::MissingStartSignal,
                0,
                "empty question",
                &chars,
            ))
        }
    }

    let mut task = None;
    for (_, tok) in iter.by_ref() {
        if tok.is_blank_text(&chars) {
            continue;
        }
        if let TokenKind::Task(t) = tok.kind {
            task = Some(t);
        } else {
            return Err(ParseError::new(
                ParseErrorKind::UnknownToken,
                tok.start,
                "expected a task prompt after [INPUT]",
                &chars,
            ));
        }
        break;
    }
    let Some(task_prompt) = task else {
        return Err(ParseError::new(
            ParseErrorKind::UnknownToken,
            chars.len(),
            "missing task prompt after [INPUT]",
            &chars,
        ));
    };

    let mut instruction_parts: Vec<String> = Vec::new();
    let mut input_asset: Option<InputAsset> = None;
    let mut stack: Vec<(Modality, usize)> = Vec::new();
    while let Some((i, tok)) = iter.next() {
        match tok.kind {
            TokenKind::Begin(m) => {
                // A top-level <X>{asset:ref}</X> triple is the input
                // wrapper; anything else stays instruction text.
                let body = tokens.get(i + 1);
                let close = tokens.get(i + 2);
                let wrapper = stack.is_empty()
                    && matches!(body.map(|t| &t.kind), Some(TokenKind::Text))
                    && close.map(|t| &t.kind) == Some(&TokenKind::End(m))
                    && asset_ref_of(&body.unwrap().lexeme(&chars)).is_some();
                if wrapper {
                    if input_asset.is_some() {
                        return Err(ParseError::new(
                            ParseErrorKind::DuplicateInputAsset,
                            tok.start,
                            "a question carries at most one input asset",
                            &chars,
                        ));
                    }
                    let id = asset_ref_of(&body.unwrap().lexeme(&chars)).unwrap().to_string();
                    input_asset = Some(InputAsset {
                        modality: m,
                        asset_ref: id,
                    });
                    iter.next();
                    iter.next();
                } else {
                    stack.push((m, tok.start));
                    instruction_parts.push(tok.lexeme(&chars));
                }
            }
            TokenKind::End(m) => match stack.pop() {
                None => {
                    return Err(ParseError::new(
                        ParseErrorKind::UnbalancedTag,
                        tok.start,
                        "end tag without a matching begin tag",
                        &chars,
                    ))
                }
                Some((open, open_pos)) if open != m => {
                    let _ = open_pos;
                    return Err(ParseError::new(
                        ParseErrorKind::TagMismatch,
                        tok.start,
                        &format!("<{open}> closed by </{m}>"),
                        &chars,
                    ));
                }
                Some(_) => instruction_parts.push(tok.lexeme(&chars)),
            },
            _ => instruction_parts.push(tok.lexeme(&chars)),
        }
    }
    if let Some((m, pos)) = stack.pop() {
        return Err(ParseError::new(
            ParseErrorKind::UnbalancedTag,
            pos,
            &format!("<{m}> is never closed"),
            &chars,
        ));
    }

    Ok(QuestionMessage {
        task_prompt,
        input_asset,
        instruction: join_text(&instruction_parts),
    })
}

/// Parse `[OUT] (text group)* tail [END]` into ordered modality groups.
///
/// Interstitial text before each group becomes that group's
/// `text_response`; text after the last group becomes `tail_text`.
pub fn parse_answer(input: &str) -> Result<AnswerMessage, ParseError> {
    let (tokens, chars) = tokenize(input);
    let mut idx = 0;

    while idx < tokens.len() && tokens[idx].is_blank_text(&chars) {
        idx += 1;
    }
    match tokens.get(idx) {
        Some(tok) if tok.kind == TokenKind::Signal(Signal::Out) => idx += 1,
        Some(tok) => {
            return Err(ParseError::new(
                ParseErrorKind::MissingStartSignal,
                tok.start,
                "answer must begin with [OUT]",
                &chars,
            ))
        }
        None => {
            return Err(ParseError::new(
                ParseErrorKind::MissingStartSignal,
                0,
                "empty answer",
                &chars,
            ))
        }
    }

    let mut groups = Vec::new();
    let mut text_buf: Vec<String> = Vec::new();
    while idx < tokens.len() {
        let tok = &tokens[idx];
        match tok.kind {
            TokenKind::Text => {
                text_buf.push(tok.lexeme(&chars));
                idx += 1;
            }
            TokenKind::Begin(modality) => {
                let begin_pos = tok.start;
                idx += 1;
                let (group, next) = parse_group(
                    &tokens,
                    &chars,
                    idx,
                    modality,
                    begin_pos,
                    join_text(&text_buf),
                )?;
                text_buf.clear();
                groups.push(group);
                idx = next;
            }
            TokenKind::End(_) => {
                return Err(ParseError::new(
                    ParseErrorKind::UnbalancedTag,
                    tok.start,
                    "end tag without a matching begin tag",
                    &chars,
                ))
            }
            TokenKind::MPrompt { .. } => {
                return Err(ParseError::new(
                    ParseErrorKind::MPromptOutsideGroup,
                    tok.start,
                    "M-Prompt outside a modality group",
                    &chars,
                ))
            }
            TokenKind::Signal(Signal::End) => {
                let tail_text = join_text(&text_buf);
                for rest in &tokens[idx + 1..] {
                    if !rest.is_blank_text(&chars) {
                        return Err(ParseError::new(
                            ParseErrorKind::UnknownToken,
                            rest.start,
                            "content after [END]",
                            &chars,
                        ));
                    }
                }
                return Ok(AnswerMessage { groups, tail_text });
            }
            TokenKind::Signal(_) | TokenKind::Task(_) => {
                return Err(ParseError::new(
                    ParseErrorKind::UnknownToken,
                    tok.start,
                    "unexpected token in answer body",
                    &chars,
                ))
            }
        }
    }
    Err(ParseError::new(
        ParseErrorKind::MissingEndSignal,
        chars.len(),
        "answer never reaches [END]",
        &chars,
    ))
}

/// Parse the inside of one begin-end pair starting right after the begin
/// tag. Returns the group and the index of the token after the end tag.
fn parse_group(
    tokens: &[Token],
    chars: &[char],
    mut idx: usize,
    modality: Modality,
    begin_pos: usize,
    text_response: String,
) -> Result<(ModalityGroup, usize), ParseError> {
    let mut t_prompt_buf: Vec<String> = Vec::new();
    let mut m_prompt_index: Option<u32> = None;
    while idx < tokens.len() {
        let tok = &tokens[idx];
        match tok.kind {
            TokenKind::Text => {
                if m_prompt_index.is_none() {
                    t_prompt_buf.push(tok.lexeme(chars));
                } else if !tok.is_blank_text(chars) {
                    return Err(ParseError::new(
                        ParseErrorKind::UnknownToken,
                        tok.start,
                        "text after the M-Prompt inside a group",
                        chars,
                    ));
                }
                idx += 1;
            }
            TokenKind::MPrompt {
                modality: got,
                index,
            } => {
                if m_prompt_index.is_some() {
                    return Err(ParseError::new(
                        ParseErrorKind::UnknownToken,
                        tok.start,
                        "a group holds exactly one M-Prompt",
                        chars,
                    ));
                }
                if got != modality {
                    return Err(ParseError::new(
                        ParseErrorKind::MPromptModalityMismatch,
                        tok.start,
                        &format!("[{got}_{index}] inside <{modality}>"),
                        chars,
                    ));
                }
                m_prompt_index = Some(index);
                idx += 1;
            }
            TokenKind::End(got) => {
                if got != modality {
                    return Err(ParseError::new(
                        ParseErrorKind::TagMismatch,
                        tok.start,
                        &format!("<{modality}> closed by </{got}>"),
                        chars,
                    ));
                }
                let Some(index) = m_prompt_index else {
                    return Err(ParseError::new(
                        ParseErrorKind::UnknownToken,
                        tok.start,
                        "group closed before its M-Prompt",
                        chars,
                    ));
                };
                let t_prompt = join_text(&t_prompt_buf);
                if t_prompt.is_empty() {
                    return Err(ParseError::new(
                        ParseErrorKind::UnknownToken,
                        tok.start,
                        "group carries an empty T-Prompt",
                        chars,
                    ));
                }
                return Ok((
                    ModalityGroup {
                        text_response,
                        modality,
                        t_prompt,
                        m_prompt_index: index,
                    },
                    idx + 1,
                ));
            }
            TokenKind::Begin(_) => {
                return Err(ParseError::new(
                    ParseErrorKind::UnknownToken,
                    tok.start,
                    "nested modality groups are not allowed",
                    chars,
                ))
            }
            TokenKind::Signal(_) | TokenKind::Task(_) => {
                return Err(ParseError::new(
                    ParseErrorKind::UnbalancedTag,
                    begin_pos,
                    &format!("<{modality}> is never closed"),
                    chars,
                ))
            }
        }
    }
    Err(ParseError::new(
        ParseErrorKind::UnbalancedTag,
        begin_pos,
        &format!("<{modality}> is never closed"),
        chars,
    ))
}
