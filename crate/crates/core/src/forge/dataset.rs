//! Dataset assembly: combine sampled records with sampled templates,
//! one instance at a time, reproducibly from a seed.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::captions::CaptionRecord;
use super::instance::{
    build_instance, build_travel_guide, concat_multi_sample, InstanceError, TmmInstance,
};
use super::pool::{Flavor, InstructionTemplate, PoolError};
use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("flavor {flavor}: empty instruction pool")]
    EmptyPool { flavor: Flavor },
    #[error("flavor {flavor}: no usable source records")]
    EmptySource { flavor: Flavor },
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// Records a flavor can actually consume: matching source modality (and
/// an asset ref) for input-wrapped flavors, any record otherwise.
fn usable<'a>(flavor: Flavor, records: &'a [CaptionRecord]) -> Vec<&'a CaptionRecord> {
    match flavor.input_modality() {
        Some(required) => records
            .iter()
            .filter(|r| {
                r.source_modality.as_modality() == Some(required) && !r.asset_ref.is_empty()
            })
            .collect(),
        None => records.iter().collect(),
    }
}

/// Draw `k` distinct record indices (falls back to repeats when the
/// source is smaller than `k`).
fn draw_distinct(rng: &mut Rng, n: usize, k: usize) -> Vec<usize> {
    if n >= k {
        let mut picked = Vec::with_capacity(k);
        while picked.len() < k {
            let i = rng.below(n);
            if !picked.contains(&i) {
                picked.push(i);
            }
        }
        picked
    } else {
        (0..k).map(|_| rng.below(n)).collect()
    }
}

/// Forge `count` instances of one flavor. Instances are built online:
/// each combines a freshly drawn sample (or samples) with a freshly
/// drawn instruction. Identical `(flavor, count, seed)` inputs yield an
/// identical instance sequence.
pub fn build_dataset(
    flavor: Flavor,
    count: usize,
    seed: u64,
    records: &[CaptionRecord],
    pool: &[InstructionTemplate],
) -> Result<Vec<TmmInstance>, DatasetError> {
    if pool.is_empty() {
        return Err(DatasetError::EmptyPool { flavor });
    }
    for template in pool {
        template.validate()?;
    }
    let usable = usable(flavor, records);
    if usable.is_empty() {
        return Err(DatasetError::EmptySource { flavor });
    }
    let mut rng = Rng::new(seed).substream(&format!("forge:{flavor}"));
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let template = rng.choice(pool);
        let instance = match flavor {
            Flavor::Tgi => {
                // Walk the city list in order so the first 1000 guides
                // cover 1000 distinct cities.
                let record = usable[i % usable.len()];
                build_travel_guide(record, template)?
            }
            Flavor::SmMi | Flavor::SpMi => {
                let k = template.target_modalities.len();
                let picks = draw_distinct(&mut rng, usable.len(), k);
                let chosen: Vec<&CaptionRecord> = picks.iter().map(|&i| usable[i]).collect();
                concat_multi_sample(&chosen, &template.target_modalities, template, flavor)?
            }
            _ => build_instance(usable[rng.below(usable.len())], template, flavor)?,
        };
        out.push(instance);
    }
    Ok(out)
}

pub fn write_instances(path: &Path, instances: &[TmmInstance]) -> io::Result<()> {
    let mut out = String::new();
    for instance in instances {
        out.push_str(&serde_json::to_string(instance).expect("instance to json"));
        out.push('\n');
    }
    fs::write(path, out)
}

#[derive(Debug, Error)]
pub enum InstancesReadError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    BadLine {
        line: usize,
        source: serde_json::Error,
    },
}

pub fn read_instances(path: &Path) -> Result<Vec<TmmInstance>, InstancesReadError> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(line).map_err(|source| InstancesReadError::BadLine {
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}
