//! Canonical serializers: parts joined by single spaces, with closing
//! punctuation glued to the previous part so interstitial periods render
//! the way the grammar's reference strings do (`</IMAGE>. <VIDEO>`).

use thiserror::Error;

use super::types::{AnswerMessage, QuestionMessage};

/// Raised when a group violates the non-empty T-Prompt contract.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("group {group}: empty t_prompt")]
pub struct EmptyTPrompt {
    pub group: usize,
}

fn glue(parts: &[String]) -> String {
    let mut out = String::new();
    for part in parts {
        if part.is_empty() {
            continue;
        }
        let starts_with_closer = part
            .chars()
            .next()
            .is_some_and(|c| matches!(c, '.' | ',' | '!' | '?' | ';' | ':'));
        if !out.is_empty() && !starts_with_closer {
            out.push(' ');
        }
        out.push_str(part);
    }
    out
}

/// `[INPUT] [task] [<X>{asset:ref}</X>] instruction`.
pub fn serialize_question(q: &QuestionMessage) -> String {
    let mut parts = vec!["[INPUT]".to_string(), q.task_prompt.token()];
    if let Some(asset) = &q.input_asset {
        parts.push(format!(
            "{}{{asset:{}}}{}",
            asset.modality.begin_tag(),
            asset.asset_ref,
            asset.modality.end_tag()
        ));
    }
    parts.push(q.instruction.clone());
    glue(&parts)
}

/// `[OUT] (text <X> t_prompt [X_i] </X>)* tail [END]`.
pub fn serialize_answer(a: &AnswerMessage) -> Result<String, EmptyTPrompt> {
    let mut parts = vec!["[OUT]".to_string()];
    for (i, g) in a.groups.iter().enumerate() {
        if g.t_prompt.trim().is_empty() {
            return Err(EmptyTPrompt { group: i });
        }
        parts.push(g.text_response.clone());
        parts.push(g.modality.begin_tag());
        parts.push(g.t_prompt.clone());
        parts.push(g.modality.m_prompt(g.m_prompt_index));
        parts.push(g.modality.end_tag());
    }
    parts.push(a.tail_text.clone());
    parts.push("[END]".to_string());
    Ok(glue(&parts))
}
