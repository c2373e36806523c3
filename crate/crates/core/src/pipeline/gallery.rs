//! The mock decoders' retrieval universe: captioned assets with frozen
//! embeddings.
//!
//! Gallery files are JSON Lines of `{"asset_ref", "modality", "caption"}`;
//! both embeddings are derived from the mock encoders at load and never
//! stored.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::encoders::{EncodeError, MockEncoders};
use crate::numerics::Tensor;
use crate::template::Modality;

/// On-disk form of one asset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GalleryFileRecord {
    pub asset_ref: String,
    pub modality: Modality,
    pub caption: String,
}

/// One loaded asset with its frozen embeddings.
#[derive(Debug, Clone)]
pub struct AssetRecord {
    pub asset_ref: String,
    pub modality: Modality,
    pub caption: String,
    /// Mock text encoding of the caption, 1 x D_c.
    pub target_embedding: Tensor,
    /// Mock input-side encoder embedding, 1 x D.
    pub encoder_embedding: Tensor,
}

#[derive(Debug, Error)]
pub enum GalleryError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    BadRecord {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: empty caption for `{asset_ref}`")]
    EmptyCaption { line: usize, asset_ref: String },
    #[error("duplicate asset_ref `{asset_ref}`")]
    DuplicateRef { asset_ref: String },
    #[error("{modality} captions `{a}` and `{b}` share one text encoding")]
    CaptionCollision {
        modality: Modality,
        a: String,
        b: String,
    },
    #[error("assets `{a}` and `{b}` share one encoder embedding")]
    EncodingCollision { a: String, b: String },
    #[error("gallery holds no {modality} assets")]
    EmptyModality { modality: Modality },
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

#[derive(Debug, Clone)]
pub struct Gallery {
    assets: Vec<AssetRecord>,
    by_ref: BTreeMap<String, usize>,
}

impl Gallery {
    /// Build from raw records, deriving embeddings and checking the
    /// uniqueness invariants (refs unique; per-modality caption
    /// encodings distinct; encoder embeddings distinct).
    pub fn from_records(
        records: Vec<GalleryFileRecord>,
        encoders: &MockEncoders,
    ) -> Result<Self, GalleryError> {
        let mut assets = Vec::with_capacity(records.len());
        let mut by_ref = BTreeMap::new();
        for r in records {
            if by_ref.contains_key(&r.asset_ref) {
                return Err(GalleryError::DuplicateRef {
                    asset_ref: r.asset_ref,
                });
            }
            let target_embedding = encoders.encode_text(&r.caption)?;
            let encoder_embedding = encoders.encode_modality(&r.asset_ref, r.modality);
            by_ref.insert(r.asset_ref.clone(), assets.len());
            assets.push(AssetRecord {
                asset_ref: r.asset_ref,
                modality: r.modality,
                caption: r.caption,
                target_embedding,
                encoder_embedding,
            });
        }
        // Exhaustive pairwise collision checks at load: desk-scale
        // galleries keep this quadratic scan cheap.
        for i in 0..assets.len() {
            for j in i + 1..assets.len() {
                let (a, b) = (&assets[i], &assets[j]);
                if a.modality == b.modality
                    && a.target_embedding.data() == b.target_embedding.data()
                {
                    return Err(GalleryError::CaptionCollision {
                        modality: a.modality,
                        a: a.caption.clone(),
                        b: b.caption.clone(),
                    });
                }
                if a.encoder_embedding.data() == b.encoder_embedding.data() {
                    return Err(GalleryError::EncodingCollision {
                        a: a.asset_ref.clone(),
                        b: b.asset_ref.clone(),
                    });
                }
            }
        }
        Ok(Gallery { assets, by_ref })
    }

    /// Assemble without the collision checks. Intended for tests that
    /// need degenerate galleries (e.g. duplicated embeddings).
    pub fn from_assets_unchecked(assets: Vec<AssetRecord>) -> Self {
        let by_ref = assets
            .iter()
            .enumerate()
            .map(|(i, a)| (a.asset_ref.clone(), i))
            .collect();
        Gallery { assets, by_ref }
    }

    pub fn load(path: &Path, encoders: &MockEncoders) -> Result<Self, GalleryError> {
        let text = fs::read_to_string(path)?;
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: GalleryFileRecord = serde_json::from_str(line)
                .map_err(|source| GalleryError::BadRecord {
                    line: i + 1,
                    source,
                })?;
            if record.caption.trim().is_empty() {
                return Err(GalleryError::EmptyCaption {
                    line: i + 1,
                    asset_ref: record.asset_ref,
                });
            }
            records.push(record);
        }
        Self::from_records(records, encoders)
    }

    pub fn save(path: &Path, records: &[GalleryFileRecord]) -> io::Result<()> {
        let mut out = String::new();
        for r in records {
            out.push_str(&serde_json::to_string(r).expect("gallery record to json"));
            out.push('\n');
        }
        fs::write(path, out)
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn assets(&self) -> &[AssetRecord] {
        &self.assets
    }

    pub fn get(&self, asset_ref: &str) -> Option<&AssetRecord> {
        self.by_ref.get(asset_ref).map(|&i| &self.assets[i])
    }

    pub fn of_modality(&self, modality: Modality) -> impl Iterator<Item = &AssetRecord> {
        self.assets.iter().filter(move |a| a.modality == modality)
    }

    /// Nearest-neighbor mock decoder: the gallery asset of `modality`
    /// whose target embedding maximizes cosine similarity with the
    /// control embedding. Ties break toward the lexicographically
    /// smaller asset_ref.
    pub fn decode(
        &self,
        modality: Modality,
        control: &Tensor,
    ) -> Result<(&AssetRecord, f64), GalleryError> {
        let mut best: Option<(&AssetRecord, f64)> = None;
        let norm_c = control.l2_norm();
        for asset in self.of_modality(modality) {
            let dot = control
                .dot(&asset.target_embedding)
                .expect("control embedding width");
            let score = dot / (norm_c * asset.target_embedding.l2_norm());
            best = match best {
                None => Some((asset, score)),
                Some((cur, cur_score)) => {
                    if score > cur_score
                        || (score == cur_score && asset.asset_ref < cur.asset_ref)
                    {
                        Some((asset, score))
                    } else {
                        Some((cur, cur_score))
                    }
                }
            };
        }
        best.ok_or(GalleryError::EmptyModality { modality })
    }
}
