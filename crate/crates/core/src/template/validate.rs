//! Task-mode validation: does a parsed answer fit its task prompt?

use std::fmt;

use super::types::{AnswerMessage, Modality, TaskPrompt};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskViolation {
    /// Single-modal tasks demand exactly one group of the task modality.
    WrongGroupCount { expected: usize, found: usize },
    WrongModality { expected: Modality, found: Modality },
    /// `[TEXT]` answers must not contain modality groups.
    GroupsInTextMode { found: usize },
    /// `[TEXT]` answers must carry a non-empty text response.
    EmptyTextAnswer,
}

impl fmt::Display for TaskViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskViolation::WrongGroupCount { expected, found } => {
                write!(f, "expected {expected} group(s), found {found}")
            }
            TaskViolation::WrongModality { expected, found } => {
                write!(f, "expected a {expected} group, found {found}")
            }
            TaskViolation::GroupsInTextMode { found } => {
                write!(f, "[TEXT] answer contains {found} modality group(s)")
            }
            TaskViolation::EmptyTextAnswer => write!(f, "[TEXT] answer has no text"),
        }
    }
}

/// Check the answer shape against the task's output mode. Smart and
/// specific multimodal tasks accept any group multiset; single-modal
/// tasks demand exactly one group of their modality; `[TEXT]` demands no
/// groups and a non-empty tail.
pub fn validate_answer_against_task(
    task: TaskPrompt,
    answer: &AnswerMessage,
) -> Vec<TaskViolation> {
    let mut violations = Vec::new();
    match task {
        TaskPrompt::Text => {
            if !answer.groups.is_empty() {
                violations.push(TaskViolation::GroupsInTextMode {
                    found: answer.groups.len(),
                });
            }
            if answer.tail_text.trim().is_empty() {
                violations.push(TaskViolation::EmptyTextAnswer);
            }
        }
        TaskPrompt::SmartMultimodal | TaskPrompt::SpecificMultimodal => {}
        single => {
            let expected = single
                .single_modality()
                .expect("non-text single-modal task");
            if answer.groups.len() != 1 {
                violations.push(TaskViolation::WrongGroupCount {
                    expected: 1,
                    found: answer.groups.len(),
                });
            }
            for g in &answer.groups {
                if g.modality != expected {
                    violations.push(TaskViolation::WrongModality {
                        expected,
                        found: g.modality,
                    });
                }
            }
        }
    }
    violations
}
