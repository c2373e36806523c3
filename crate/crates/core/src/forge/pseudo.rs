//! Pseudo many-modal dataset emission: run forged questions through the
//! trained pipeline and record which gallery assets realized each group.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::captions::{CaptionRecord, SourceModality};
use super::dataset::{build_dataset, DatasetError};
use super::pool::{builtin_pool, Flavor};
use super::synth::city_list;
use crate::controller::Controller;
use crate::pipeline::{run_pipeline, Gallery, MockEncoders, PipelineError, Planner};
use crate::template::Modality;

/// One realized output asset of a pseudo record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizedAsset {
    pub modality: Modality,
    pub asset_ref: String,
}

/// A question paired with the assets its answer actually realized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoRecord {
    pub question: String,
    pub answer: String,
    pub realized_assets: Vec<RealizedAsset>,
}

#[derive(Debug, Error)]
pub enum PseudoError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("pipeline failed on question `{question}`: {source}")]
    Pipeline {
        question: String,
        source: PipelineError,
    },
    #[error("gallery provides no {needed} assets for flavor {flavor}")]
    MissingModality { flavor: Flavor, needed: Modality },
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// Default record count per flavor (the travel-guide flavor ships half).
pub fn default_count(flavor: Flavor) -> usize {
    match flavor {
        Flavor::Tgi => 1000,
        _ => 2000,
    }
}

/// Derive forgeable caption records from the gallery so pseudo questions
/// reference assets and captions that exist in the decode universe.
fn records_from_gallery(flavor: Flavor, gallery: &Gallery) -> Result<Vec<CaptionRecord>, PseudoError> {
    let assets_of = |m: Modality| -> Vec<(&str, &str)> {
        gallery
            .of_modality(m)
            .map(|a| (a.asset_ref.as_str(), a.caption.as_str()))
            .collect()
    };
    let need = |m: Modality, v: &Vec<(&str, &str)>| -> Result<(), PseudoError> {
        if v.is_empty() {
            return Err(PseudoError::MissingModality { flavor, needed: m });
        }
        Ok(())
    };
    let plain = |m: Modality, source: SourceModality| -> Result<Vec<CaptionRecord>, PseudoError> {
        let assets = assets_of(m);
        need(m, &assets)?;
        Ok(assets
            .iter()
            .enumerate()
            .map(|(i, (asset_ref, caption))| CaptionRecord {
                id: format!("g{i:05}"),
                caption: caption.to_string(),
                source_modality: source,
                asset_ref: if source == SourceModality::Text {
                    String::new()
                } else {
                    asset_ref.to_string()
                },
            })
            .collect())
    };
    match flavor {
        // Text-to-many flavors sample captions of the headline modality.
        Flavor::T2i => plain(Modality::Image, SourceModality::Text),
        Flavor::T2v | Flavor::SmMi | Flavor::SpMi => plain(Modality::Video, SourceModality::Text),
        Flavor::T2a => plain(Modality::Audio, SourceModality::Text),
        // Captioning flavors wrap the asset itself.
        Flavor::I2t => plain(Modality::Image, SourceModality::Image),
        Flavor::V2t => plain(Modality::Video, SourceModality::Video),
        Flavor::A2t => plain(Modality::Audio, SourceModality::Audio),
        // Box/mask flavors pair image inputs with annotation captions.
        Flavor::I2b | Flavor::I2m => {
            let images = assets_of(Modality::Image);
            need(Modality::Image, &images)?;
            let ann_modality = if flavor == Flavor::I2b {
                Modality::Box
            } else {
                Modality::Mask
            };
            let annotations = assets_of(ann_modality);
            need(ann_modality, &annotations)?;
            Ok((0..images.len().max(annotations.len()))
                .map(|i| CaptionRecord {
                    id: format!("g{i:05}"),
                    caption: annotations[i % annotations.len()].1.to_string(),
                    source_modality: SourceModality::Image,
                    asset_ref: images[i % images.len()].0.to_string(),
                })
                .collect())
        }
        Flavor::Tgi => Ok(city_list()
            .into_iter()
            .enumerate()
            .map(|(i, city)| CaptionRecord {
                id: format!("city_{i:04}"),
                caption: city,
                source_modality: SourceModality::Text,
                asset_ref: String::new(),
            })
            .collect()),
    }
}

/// Forge `count` questions for the flavor, run each through the trained
/// pipeline, and collect the realized assets. Any pipeline failure
/// aborts with the offending question echoed.
pub fn emit_pseudo_dataset(
    flavor: Flavor,
    count: usize,
    seed: u64,
    controller: &Controller,
    gallery: &Gallery,
    encoders: &MockEncoders,
    planner: &Planner,
) -> Result<Vec<PseudoRecord>, PseudoError> {
    let records = records_from_gallery(flavor, gallery)?;
    let pool = builtin_pool(flavor);
    let instances = build_dataset(flavor, count, seed, &records, &pool)?;
    let mut out = Vec::with_capacity(count);
    for instance in instances {
        let result = run_pipeline(&instance.question, controller, gallery, encoders, planner)
            .map_err(|source| PseudoError::Pipeline {
                question: instance.question.clone(),
                source,
            })?;
        out.push(PseudoRecord {
            question: instance.question,
            answer: result.answer_text,
            realized_assets: result
                .realized
                .iter()
                .map(|r| RealizedAsset {
                    modality: r.modality,
                    asset_ref: r.asset_ref.clone(),
                })
                .collect(),
        });
    }
    Ok(out)
}

pub fn write_pseudo(path: &Path, records: &[PseudoRecord]) -> io::Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("pseudo record to json"));
        text.push('\n');
    }
    fs::write(path, text)
}
