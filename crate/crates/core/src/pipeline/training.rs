//! Training-item assembly and the batch loop.
//!
//! One answer group becomes one training item: the group's signal-prompt
//! hidden state (from the question context), the text encoding of its
//! T-Prompt, and the question's context embedding as the reconstruction
//! target. The context is the input asset's encoder embedding when the
//! question carries one, otherwise the lifted instruction text.

use thiserror::Error;

use super::encoders::{EncodeError, MockEncoders};
use super::gallery::Gallery;
use crate::controller::{BatchItem, Controller, ControllerError, StepStats};
use crate::forge::instance::TmmInstance;
use crate::numerics::AdamState;
use crate::rng::Rng;
use crate::template::{parse_answer, parse_question, ParseError};

#[derive(Debug, Error)]
pub enum TrainingDataError {
    #[error("instance {index}: {source}")]
    Parse { index: usize, source: ParseError },
    #[error("instance {index}: {source}")]
    Encode { index: usize, source: EncodeError },
    #[error("no training items (all instances are text-only?)")]
    Empty,
}

/// Expand forged instances into per-group training items.
pub fn assemble_items(
    instances: &[TmmInstance],
    encoders: &MockEncoders,
    l: usize,
) -> Result<Vec<BatchItem>, TrainingDataError> {
    let mut items = Vec::new();
    for (index, instance) in instances.iter().enumerate() {
        let question = parse_question(&instance.question)
            .map_err(|source| TrainingDataError::Parse { index, source })?;
        let answer = parse_answer(&instance.answer)
            .map_err(|source| TrainingDataError::Parse { index, source })?;
        let context = encoders
            .question_context(&question)
            .map_err(|source| TrainingDataError::Encode { index, source })?;
        for group in &answer.groups {
            let t_e = encoders
                .encode_text(&group.t_prompt)
                .map_err(|source| TrainingDataError::Encode { index, source })?;
            items.push(BatchItem {
                modality: group.modality,
                m_e: encoders.llm_hidden(&context, group.modality, l),
                t_e,
                e: context.clone(),
            });
        }
    }
    if items.is_empty() {
        return Err(TrainingDataError::Empty);
    }
    Ok(items)
}

/// One item per gallery asset: regenerate the asset from itself
/// (the plain X-to-X pretraining shape).
pub fn pilot_items_from_gallery(gallery: &Gallery, encoders: &MockEncoders, l: usize) -> Vec<BatchItem> {
    gallery
        .assets()
        .iter()
        .map(|asset| BatchItem {
            modality: asset.modality,
            m_e: encoders.llm_hidden(&asset.encoder_embedding, asset.modality, l),
            t_e: asset.target_embedding.clone(),
            e: asset.encoder_embedding.clone(),
        })
        .collect()
}

/// Epoch-shuffled minibatch schedule: `steps` batches of `batch_size`,
/// reshuffling the item order (from the `"batch"` substream of `seed`)
/// each time the pool is exhausted.
pub fn train_loop(
    controller: &mut Controller,
    adam: &mut AdamState,
    items: &[BatchItem],
    steps: usize,
    batch_size: usize,
    seed: u64,
    mut on_step: impl FnMut(usize, &StepStats),
) -> Result<Vec<StepStats>, ControllerError> {
    if items.is_empty() {
        return Err(ControllerError::EmptyBatch);
    }
    let mut rng = Rng::new(seed).substream("batch");
    let mut order: Vec<usize> = (0..items.len()).collect();
    rng.shuffle(&mut order);
    let mut cursor = 0usize;
    let mut history = Vec::with_capacity(steps);
    for step in 1..=steps {
        let mut batch = Vec::with_capacity(batch_size);
        for _ in 0..batch_size.min(items.len()) {
            if cursor == order.len() {
                rng.shuffle(&mut order);
                cursor = 0;
            }
            batch.push(items[order[cursor]].clone());
            cursor += 1;
        }
        let stats = controller.train_step(&batch, adam)?;
        on_step(step, &stats);
        history.push(stats);
    }
    Ok(history)
}
