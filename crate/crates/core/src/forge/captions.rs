//! Caption corpora: the desk-scale stand-ins for the large image/video/
//! audio caption sources.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::template::Modality;

/// Modality of the source sample; `TEXT` marks caption-only rows with no
/// attached asset (used by the text-to-many and travel-guide flavors).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceModality {
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
}

impl SourceModality {
    pub fn as_modality(self) -> Option<Modality> {
        match self {
            SourceModality::Text => None,
            SourceModality::Image => Some(Modality::Image),
            SourceModality::Audio => Some(Modality::Audio),
            SourceModality::Video => Some(Modality::Video),
            SourceModality::Box => Some(Modality::Box),
            SourceModality::Mask => Some(Modality::Mask),
        }
    }

    pub fn from_modality(m: Modality) -> Self {
        match m {
            Modality::Image => SourceModality::Image,
            Modality::Audio => SourceModality::Audio,
            Modality::Video => SourceModality::Video,
            Modality::Box => SourceModality::Box,
            Modality::Mask => SourceModality::Mask,
        }
    }
}

/// One source sample: a caption plus an optional asset reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub id: String,
    pub caption: String,
    pub source_modality: SourceModality,
    #[serde(default)]
    pub asset_ref: String,
}

#[derive(Debug, Error)]
pub enum CaptionsError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    BadLine {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: empty caption in record `{id}`")]
    EmptyCaption { line: usize, id: String },
    #[error("duplicate record id `{id}`")]
    DuplicateId { id: String },
}

/// Read a captions JSONL file, rejecting malformed lines (by number),
/// empty captions, and duplicate ids.
pub fn load_captions(path: &Path) -> Result<Vec<CaptionRecord>, CaptionsError> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: CaptionRecord =
            serde_json::from_str(line).map_err(|source| CaptionsError::BadLine {
                line: i + 1,
                source,
            })?;
        if record.caption.trim().is_empty() {
            return Err(CaptionsError::EmptyCaption {
                line: i + 1,
                id: record.id,
            });
        }
        if !seen.insert(record.id.clone()) {
            return Err(CaptionsError::DuplicateId { id: record.id });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn save_captions(path: &Path, records: &[CaptionRecord]) -> io::Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("caption record to json"));
        out.push('\n');
    }
    fs::write(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(lines: &[&str]) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn well_formed_file_loads() {
        let f = write(&[
            r#"{"id":"a","caption":"a red bus","source_modality":"IMAGE","asset_ref":"img_1"}"#,
            r#"{"id":"b","caption":"rain falling","source_modality":"AUDIO","asset_ref":"aud_1"}"#,
            r#"{"id":"c","caption":"a gray cat","source_modality":"TEXT"}"#,
        ]);
        let records = load_captions(f.path()).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[2].asset_ref, "");
        assert_eq!(records[0].source_modality.as_modality(), Some(Modality::Image));
    }

    #[test]
    fn missing_caption_field_names_the_line() {
        let f = write(&[
            r#"{"id":"a","caption":"x","source_modality":"TEXT"}"#,
            r#"{"id":"b","source_modality":"TEXT"}"#,
        ]);
        let err = load_captions(f.path()).unwrap_err();
        assert!(matches!(err, CaptionsError::BadLine { line: 2, .. }), "{err}");
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let f = write(&[
            r#"{"id":"a","caption":"x","source_modality":"TEXT"}"#,
            r#"{"id":"a","caption":"y","source_modality":"TEXT"}"#,
        ]);
        assert!(matches!(
            load_captions(f.path()).unwrap_err(),
            CaptionsError::DuplicateId { .. }
        ));
    }
}
