//! Message structures for the instruction template grammar.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Output modalities that can appear inside an answer. Text is not a
/// wrapped modality; it lives outside the begin-end pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "IMAGE")]
    Image,
    #[serde(rename = "AUDIO")]
    Audio,
    #[serde(rename = "VIDEO")]
    Video,
    #[serde(rename = "BOX")]
    Box,
    #[serde(rename = "MASK")]
    Mask,
}

impl Modality {
    pub const ALL: [Modality; 5] = [
        Modality::Image,
        Modality::Audio,
        Modality::Video,
        Modality::Box,
        Modality::Mask,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Image => "IMAGE",
            Modality::Audio => "AUDIO",
            Modality::Video => "VIDEO",
            Modality::Box => "BOX",
            Modality::Mask => "MASK",
        }
    }

    pub fn from_name(name: &str) -> Option<Modality> {
        Modality::ALL.iter().copied().find(|m| m.name() == name)
    }

    /// Begin tag, e.g. `<IMAGE>`.
    pub fn begin_tag(self) -> String {
        format!("<{}>", self.name())
    }

    /// End tag, e.g. `</IMAGE>`.
    pub fn end_tag(self) -> String {
        format!("</{}>", self.name())
    }

    /// Signal token for group index `i`, e.g. `[IMAGE_0]`.
    pub fn m_prompt(self, index: u32) -> String {
        format!("[{}_{}]", self.name(), index)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The eight task prompts selecting the output mode: six single-modal
/// tokens, plus the smart and specific multimodal modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskPrompt {
    #[serde(rename = "TEXT")]
    Text,
    #[serde(rename = "IMAGE")]
    Image,
    #[serde(rename = "AUDIO")]
    Audio,
    #[serde(rename = "VIDEO")]
    Video,
    #[serde(rename = "BOX")]
    Box,
    #[serde(rename = "MASK")]
    Mask,
    #[serde(rename = "SMARTMULTIMODAL")]
    SmartMultimodal,
    #[serde(rename = "SPECIFICMULTIMODAL")]
    SpecificMultimodal,
}

impl TaskPrompt {
    pub const ALL: [TaskPrompt; 8] = [
        TaskPrompt::Text,
        TaskPrompt::Image,
        TaskPrompt::Audio,
        TaskPrompt::Video,
        TaskPrompt::Box,
        TaskPrompt::Mask,
        TaskPrompt::SmartMultimodal,
        TaskPrompt::SpecificMultimodal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskPrompt::Text => "TEXT",
            TaskPrompt::Image => "IMAGE",
            TaskPrompt::Audio => "AUDIO",
            TaskPrompt::Video => "VIDEO",
            TaskPrompt::Box => "BOX",
            TaskPrompt::Mask => "MASK",
            TaskPrompt::SmartMultimodal => "SMARTMULTIMODAL",
            TaskPrompt::SpecificMultimodal => "SPECIFICMULTIMODAL",
        }
    }

    pub fn from_name(name: &str) -> Option<TaskPrompt> {
        TaskPrompt::ALL.iter().copied().find(|t| t.name() == name)
    }

    /// Bracketed token spelling, e.g. `[SMARTMULTIMODAL]`.
    pub fn token(self) -> String {
        format!("[{}]", self.name())
    }

    /// The single target modality of a single-modal task, if any.
    pub fn single_modality(self) -> Option<Modality> {
        match self {
            TaskPrompt::Image => Some(Modality::Image),
            TaskPrompt::Audio => Some(Modality::Audio),
            TaskPrompt::Video => Some(Modality::Video),
            TaskPrompt::Box => Some(Modality::Box),
            TaskPrompt::Mask => Some(Modality::Mask),
            _ => None,
        }
    }
}

impl fmt::Display for TaskPrompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

/// The input-side asset wrapper `<X>{asset:ref}</X>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputAsset {
    pub modality: Modality,
    pub asset_ref: String,
}

/// A parsed input question: `[INPUT] [task] [<X>{asset:ref}</X>] instruction`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionMessage {
    pub task_prompt: TaskPrompt,
    pub input_asset: Option<InputAsset>,
    pub instruction: String,
}

/// One modality group of an answer:
/// `text <X> t_prompt [X_i] </X>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalityGroup {
    /// Interstitial text preceding this group (may be empty).
    pub text_response: String,
    pub modality: Modality,
    /// Caption conditioning the decoder; never empty in a valid group.
    pub t_prompt: String,
    /// The i of `[X_i]`; forged data always uses 0.
    pub m_prompt_index: u32,
}

/// A parsed answer: `[OUT] group* tail [END]`. Groups may repeat any
/// modality in any order; a text-only answer has no groups and the whole
/// response in `tail_text`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnswerMessage {
    pub groups: Vec<ModalityGroup>,
    pub tail_text: String,
}

impl AnswerMessage {
    pub fn text_only(tail: impl Into<String>) -> Self {
        AnswerMessage {
            groups: Vec::new(),
            tail_text: tail.into(),
        }
    }

    /// Multiset of group modalities in order of appearance.
    pub fn modalities(&self) -> Vec<Modality> {
        self.groups.iter().map(|g| g.modality).collect()
    }
}
