//! Instance construction: one (question, answer) pair from a sample and
//! an instruction template.
//!
//! The answer convention mirrors the reference construction: the first
//! group's text response is the content followed by a period, each later
//! group carries the separating period, and the trailing group closes
//! straight into `[END]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::captions::CaptionRecord;
use super::pool::{Flavor, InstructionTemplate};
use crate::template::{
    parse_answer, parse_question, serialize_answer, serialize_question,
    validate_answer_against_task, AnswerMessage, InputAsset, Modality, ModalityGroup,
    QuestionMessage, TaskPrompt,
};

/// One forged training pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TmmInstance {
    pub question: String,
    pub answer: String,
    pub flavor: String,
    pub sample_id: String,
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("template requires {expected} input but record `{id}` is {found:?}")]
    InputModalityMismatch {
        expected: Modality,
        id: String,
        found: super::captions::SourceModality,
    },
    #[error("record `{id}` carries no asset_ref but the template needs an input wrapper")]
    MissingAssetRef { id: String },
    #[error("multi-sample construction needs at least 2 records, got {got}")]
    TooFewSamples { got: usize },
    #[error("{got} records for {expected} target modalities")]
    SampleCountMismatch { got: usize, expected: usize },
    #[error("forged instance failed its own checks: {what}")]
    SelfCheck { what: String },
}

/// Answer with the standard text-response convention: leading text on
/// the first group, a period on each subsequent group.
pub fn compose_answer(leading: &str, groups: &[(Modality, String)]) -> AnswerMessage {
    let groups = groups
        .iter()
        .enumerate()
        .map(|(i, (modality, t_prompt))| ModalityGroup {
            text_response: if i == 0 {
                leading.to_string()
            } else {
                ".".to_string()
            },
            modality: *modality,
            t_prompt: t_prompt.clone(),
            m_prompt_index: 0,
        })
        .collect();
    AnswerMessage {
        groups,
        tail_text: String::new(),
    }
}

/// Phrase introducing one modality request in a smart-multimodal list.
pub fn modality_request_phrase(m: Modality) -> &'static str {
    match m {
        Modality::Image => "an image of",
        Modality::Audio => "an audio clip of",
        Modality::Video => "a video of",
        Modality::Box => "a bounding box of",
        Modality::Mask => "a segmentation mask of",
    }
}

/// `an image of X; a video of Y` (separator `"; "`).
pub fn render_request_list(pairs: &[(Modality, String)]) -> String {
    pairs
        .iter()
        .map(|(m, caption)| format!("{} {caption}", modality_request_phrase(*m)))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Invert [`render_request_list`].
pub fn parse_request_list(content: &str) -> Option<Vec<(Modality, String)>> {
    let mut out = Vec::new();
    for part in content.split("; ") {
        let (modality, caption) = Modality::ALL.iter().find_map(|&m| {
            part.strip_prefix(modality_request_phrase(m))
                .and_then(|rest| rest.strip_prefix(' '))
                .map(|caption| (m, caption))
        })?;
        if caption.is_empty() {
            return None;
        }
        out.push((modality, caption.to_string()));
    }
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

/// `<IMAGE> caption [IMAGE_0] </IMAGE> <VIDEO> ... </VIDEO>` — the
/// answer-format skeleton embedded in specific-multimodal questions.
pub fn render_skeleton(pairs: &[(Modality, String)]) -> String {
    pairs
        .iter()
        .map(|(m, caption)| {
            format!("{} {caption} {} {}", m.begin_tag(), m.m_prompt(0), m.end_tag())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parse a skeleton back into (modality, caption) pairs by wrapping it
/// in the answer signals and reusing the answer parser.
pub fn parse_skeleton(content: &str) -> Option<Vec<(Modality, String)>> {
    let parsed = parse_answer(&format!("[OUT] {content} [END]")).ok()?;
    if parsed.groups.is_empty() || !parsed.tail_text.is_empty() {
        return None;
    }
    if parsed.groups.iter().any(|g| !g.text_response.is_empty()) {
        return None;
    }
    Some(
        parsed
            .groups
            .into_iter()
            .map(|g| (g.modality, g.t_prompt))
            .collect(),
    )
}

/// Leading text of a travel-guide answer.
pub fn travel_guide_leading(city: &str) -> String {
    format!("Here is a travel guide for {city}.")
}

/// The fixed image/audio/video group structure of a travel guide.
pub fn travel_guide_groups(city: &str) -> Vec<(Modality, String)> {
    vec![
        (Modality::Image, format!("A scenic view of {city}")),
        (Modality::Audio, format!("The ambient street sounds of {city}")),
        (Modality::Video, format!("A walking tour of {city}")),
    ]
}

fn question_for(
    template: &InstructionTemplate,
    record: &CaptionRecord,
    content: &str,
) -> Result<QuestionMessage, InstanceError> {
    let input_asset = match template.requires_input_modality {
        None => None,
        Some(expected) => {
            if record.source_modality.as_modality() != Some(expected) {
                return Err(InstanceError::InputModalityMismatch {
                    expected,
                    id: record.id.clone(),
                    found: record.source_modality,
                });
            }
            if record.asset_ref.is_empty() {
                return Err(InstanceError::MissingAssetRef {
                    id: record.id.clone(),
                });
            }
            Some(InputAsset {
                modality: expected,
                asset_ref: record.asset_ref.clone(),
            })
        }
    };
    Ok(QuestionMessage {
        task_prompt: template.task_prompt,
        input_asset,
        instruction: template.instantiate(content),
    })
}

fn finish(
    flavor: Flavor,
    template: &InstructionTemplate,
    question: QuestionMessage,
    answer: AnswerMessage,
    sample_id: String,
) -> Result<TmmInstance, InstanceError> {
    let instance = TmmInstance {
        question: serialize_question(&question),
        answer: serialize_answer(&answer).map_err(|e| InstanceError::SelfCheck {
            what: e.to_string(),
        })?,
        flavor: flavor.name().to_string(),
        sample_id,
    };
    verify_instance(&instance, template)?;
    Ok(instance)
}

/// Re-parse and re-validate a forged instance against its template:
/// the question and answer must parse, the answer must fit the task
/// prompt, and the answer's modality multiset must equal the template's
/// targets exactly.
pub fn verify_instance(
    instance: &TmmInstance,
    template: &InstructionTemplate,
) -> Result<(), InstanceError> {
    let err = |what: String| InstanceError::SelfCheck { what };
    let question =
        parse_question(&instance.question).map_err(|e| err(format!("question: {e}")))?;
    let answer = parse_answer(&instance.answer).map_err(|e| err(format!("answer: {e}")))?;
    let violations = validate_answer_against_task(question.task_prompt, &answer);
    if !violations.is_empty() {
        return Err(err(format!("task violation: {}", violations[0])));
    }
    let mut got = answer.modalities();
    let mut want = template.target_modalities.clone();
    got.sort();
    want.sort();
    if got != want {
        return Err(err(format!("modalities {got:?} != template {want:?}")));
    }
    if answer.groups.iter().any(|g| g.m_prompt_index != 0) {
        return Err(err("forged M-Prompt index must be 0".into()));
    }
    Ok(())
}

/// One single-sample instance: substitute the caption, emit one group
/// per target modality (text-mode templates emit a pure-text answer).
pub fn build_instance(
    record: &CaptionRecord,
    template: &InstructionTemplate,
    flavor: Flavor,
) -> Result<TmmInstance, InstanceError> {
    let question = question_for(template, record, &record.caption)?;
    let answer = if template.task_prompt == TaskPrompt::Text {
        AnswerMessage::text_only(record.caption.clone())
    } else {
        let groups: Vec<(Modality, String)> = template
            .target_modalities
            .iter()
            .map(|&m| (m, record.caption.clone()))
            .collect();
        compose_answer(&format!("{}.", record.caption), &groups)
    };
    finish(flavor, template, question, answer, record.id.clone())
}

/// Multi-sample instance (smart or specific multimodal): k records and
/// k modalities yield one question listing every request and an answer
/// of exactly k groups in order.
pub fn concat_multi_sample(
    records: &[&CaptionRecord],
    modalities: &[Modality],
    template: &InstructionTemplate,
    flavor: Flavor,
) -> Result<TmmInstance, InstanceError> {
    if records.len() < 2 {
        return Err(InstanceError::TooFewSamples { got: records.len() });
    }
    if records.len() != modalities.len() {
        return Err(InstanceError::SampleCountMismatch {
            got: records.len(),
            expected: modalities.len(),
        });
    }
    let pairs: Vec<(Modality, String)> = modalities
        .iter()
        .zip(records)
        .map(|(&m, r)| (m, r.caption.clone()))
        .collect();
    let (content, answer) = match template.task_prompt {
        TaskPrompt::SpecificMultimodal => {
            // The question quotes the exact answer skeleton; the answer
            // reproduces it verbatim (no interstitial text).
            let skeleton = render_skeleton(&pairs);
            let groups = pairs
                .iter()
                .map(|(m, caption)| ModalityGroup {
                    text_response: String::new(),
                    modality: *m,
                    t_prompt: caption.clone(),
                    m_prompt_index: 0,
                })
                .collect();
            (
                skeleton,
                AnswerMessage {
                    groups,
                    tail_text: String::new(),
                },
            )
        }
        _ => {
            let list = render_request_list(&pairs);
            let leading = format!("{}.", pairs[0].1);
            (list, compose_answer(&leading, &pairs))
        }
    };
    let question = question_for(template, records[0], &content)?;
    let sample_id = records
        .iter()
        .map(|r| r.id.as_str())
        .collect::<Vec<_>>()
        .join("+");
    finish(flavor, template, question, answer, sample_id)
}

/// Travel-guide instance: the content is a city name and the answer has
/// the fixed image/audio/video guide structure.
pub fn build_travel_guide(
    record: &CaptionRecord,
    template: &InstructionTemplate,
) -> Result<TmmInstance, InstanceError> {
    let city = &record.caption;
    let question = question_for(template, record, city)?;
    let answer = compose_answer(&travel_guide_leading(city), &travel_guide_groups(city));
    finish(Flavor::Tgi, template, question, answer, record.id.clone())
}
