//! Rule-based planner: the deterministic stand-in for the finetuned
//! language model's answer generation.
//!
//! Every instruction pattern registered from the forge pools can be
//! inverted: match the question's task prompt, input-wrapper modality,
//! and pattern halves, recover the content, and rebuild exactly the
//! answer the forge would have produced for that template. Longer
//! patterns are tried first so more specific phrasings win.

use thiserror::Error;

use crate::forge::instance::{
    compose_answer, parse_request_list, parse_skeleton, travel_guide_groups,
    travel_guide_leading,
};
use crate::forge::pool::{builtin_pool, Flavor, InstructionTemplate};
use crate::template::{AnswerMessage, ModalityGroup, QuestionMessage, TaskPrompt};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("no registered instruction pattern matches: `{instruction}`")]
    UnmatchedInstruction { instruction: String },
}

#[derive(Debug, Clone)]
struct Entry {
    flavor: Flavor,
    template: InstructionTemplate,
}

/// Pattern registry with deterministic first-match planning.
#[derive(Debug, Clone)]
pub struct Planner {
    entries: Vec<Entry>,
}

impl Planner {
    /// Register every builtin pool.
    pub fn with_builtin_pools() -> Self {
        Self::from_pools(
            Flavor::ALL
                .iter()
                .map(|&flavor| (flavor, builtin_pool(flavor)))
                .collect(),
        )
    }

    /// Register explicit pools. Entries are ordered by descending
    /// literal pattern length (registration order breaks ties), which
    /// keeps matching deterministic and prefers specific phrasings.
    pub fn from_pools(pools: Vec<(Flavor, Vec<InstructionTemplate>)>) -> Self {
        let mut entries: Vec<Entry> = pools
            .into_iter()
            .flat_map(|(flavor, pool)| {
                pool.into_iter().map(move |template| Entry { flavor, template })
            })
            .collect();
        entries.sort_by_key(|e| std::cmp::Reverse(e.template.pattern.len() - 2));
        Planner { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Recover target modalities and content from the question and
    /// construct the answer. Returns `UnmatchedInstruction` when no
    /// registered pattern fits (the out-of-distribution signal).
    pub fn plan(&self, question: &QuestionMessage) -> Result<AnswerMessage, PlanError> {
        for entry in &self.entries {
            if entry.template.task_prompt != question.task_prompt {
                continue;
            }
            let wrapper = question.input_asset.as_ref().map(|a| a.modality);
            if entry.template.requires_input_modality != wrapper {
                continue;
            }
            let Some(content) = entry.template.invert(&question.instruction) else {
                continue;
            };
            if let Some(answer) = plan_with(entry, content) {
                return Ok(answer);
            }
        }
        Err(PlanError::UnmatchedInstruction {
            instruction: question.instruction.clone(),
        })
    }
}

fn plan_with(entry: &Entry, content: &str) -> Option<AnswerMessage> {
    let template = &entry.template;
    match entry.flavor {
        Flavor::Tgi => Some(compose_answer(
            &travel_guide_leading(content),
            &travel_guide_groups(content),
        )),
        Flavor::SmMi => {
            let pairs = parse_request_list(content)?;
            let modalities: Vec<_> = pairs.iter().map(|(m, _)| *m).collect();
            if modalities != template.target_modalities {
                return None;
            }
            let leading = format!("{}.", pairs[0].1);
            Some(compose_answer(&leading, &pairs))
        }
        Flavor::SpMi => {
            let pairs = parse_skeleton(content)?;
            let modalities: Vec<_> = pairs.iter().map(|(m, _)| *m).collect();
            if modalities != template.target_modalities {
                return None;
            }
            let groups = pairs
                .into_iter()
                .map(|(modality, t_prompt)| ModalityGroup {
                    text_response: String::new(),
                    modality,
                    t_prompt,
                    m_prompt_index: 0,
                })
                .collect();
            Some(AnswerMessage {
                groups,
                tail_text: String::new(),
            })
        }
        _ => {
            if template.task_prompt == TaskPrompt::Text {
                return Some(AnswerMessage::text_only(content));
            }
            let pairs: Vec<_> = template
                .target_modalities
                .iter()
                .map(|&m| (m, content.to_string()))
                .collect();
            Some(compose_answer(&format!("{content}."), &pairs))
        }
    }
}
