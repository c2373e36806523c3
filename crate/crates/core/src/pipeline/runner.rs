//! End-to-end execution: question string -> parsed question -> planned
//! answer -> per-group controller forward -> nearest-neighbor decode.

use serde::Serialize;
use thiserror::Error;

use super::encoders::{EncodeError, MockEncoders};
use super::gallery::{Gallery, GalleryError};
use super::planner::{PlanError, Planner};
use crate::controller::{Controller, ControllerError};
use crate::numerics::Tensor;
use crate::template::{parse_question, serialize_answer, AnswerMessage, Modality, ParseError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("parse: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Gallery(#[from] GalleryError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("the planned answer does not serialize: {0}")]
    Serialize(#[from] crate::template::EmptyTPrompt),
}

/// The asset chosen for one answer group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizedGroup {
    pub modality: Modality,
    pub asset_ref: String,
    pub score: f64,
}

/// Everything the pipeline produced for one question.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineResult {
    pub answer: AnswerMessage,
    /// Canonical serialized form of `answer`.
    pub answer_text: String,
    pub realized: Vec<RealizedGroup>,
    /// Per-group controlling embeddings S, 1 x D_c each.
    pub control_embeddings: Vec<Tensor>,
}

/// Run the full mock pipeline for one question string.
pub fn run_pipeline(
    question: &str,
    controller: &Controller,
    gallery: &Gallery,
    encoders: &MockEncoders,
    planner: &Planner,
) -> Result<PipelineResult, PipelineError> {
    let parsed = parse_question(question)?;
    let answer = planner.plan(&parsed)?;
    let mut realized = Vec::with_capacity(answer.groups.len());
    let mut control_embeddings = Vec::with_capacity(answer.groups.len());
    for group in &answer.groups {
        let m_e = encoders.llm_hidden_for_question(&parsed, group.modality, controller.config.l)?;
        let t_e = encoders.encode_text(&group.t_prompt)?;
        let inference = controller.infer_group(group.modality, &m_e, &t_e)?;
        let (asset, score) = gallery.decode(group.modality, &inference.s)?;
        realized.push(RealizedGroup {
            modality: group.modality,
            asset_ref: asset.asset_ref.clone(),
            score,
        });
        control_embeddings.push(inference.s);
    }
    let answer_text = serialize_answer(&answer)?;
    Ok(PipelineResult {
        answer,
        answer_text,
        realized,
        control_embeddings,
    })
}
