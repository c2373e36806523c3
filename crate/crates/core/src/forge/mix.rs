//! Stage-proportion mixing.
//!
//! Proportions are stored in thousandths so each stage's table sums to
//! exactly 1000 and derived masses (like the stage-3 instruction share)
//! are exact. Sampling draws a uniform integer below 1000 and walks the
//! cumulative table.

use thiserror::Error;

use crate::rng::Rng;

/// Dataset-name -> proportion table for one training stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageMix {
    pub stage: u8,
    /// (dataset name, thousandths of the total).
    entries: Vec<(&'static str, u32)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MixError {
    #[error("stage must be 1, 2, or 3 (got {0})")]
    UnknownStage(u8),
    #[error("stage {stage}: proportions sum to {sum} per mille, not 1000")]
    BadSum { stage: u8, sum: u32 },
    #[error("stage {stage}: zero proportion for `{name}`")]
    ZeroEntry { stage: u8, name: &'static str },
}

/// Stage 1 mixes only the plain X-to-X sources.
const STAGE_1: &[(&str, u32)] = &[
    ("cc3m-i2t", 100),
    ("webvid-v2t", 100),
    ("audiocap-a2t", 100),
    ("cc3m-t2i", 200),
    ("webvid-t2v", 200),
    ("audiocap-t2a", 100),
    ("coco-i2b", 100),
    ("coco-i2m", 100),
];

/// Stage 2 mixes the text-formatted many-modal flavors.
const STAGE_2: &[(&str, u32)] = &[
    ("t2txs-t2i", 100),
    ("t2txs-t2v", 100),
    ("t2txs-t2a", 100),
    ("x2txs-i2t", 200),
    ("x2txs-v2t", 200),
    ("x2txs-a2t", 100),
    ("x2txs-i2b", 100),
    ("x2txs-i2m", 100),
];

/// Stage 3 gives the three instruction flavors 70% of the mass.
const STAGE_3: &[(&str, u32)] = &[
    ("smmi", 500),
    ("spmi", 100),
    ("tgi", 100),
    ("x2txs-i2t", 60),
    ("x2txs-v2t", 60),
    ("x2txs-a2t", 30),
    ("x2txs-i2b", 30),
    ("x2txs-i2m", 30),
    ("t2txs-t2i", 30),
    ("t2txs-t2v", 30),
    ("t2txs-t2a", 30),
];

impl StageMix {
    pub fn for_stage(stage: u8) -> Result<StageMix, MixError> {
        let entries = match stage {
            1 => STAGE_1,
            2 => STAGE_2,
            3 => STAGE_3,
            other => return Err(MixError::UnknownStage(other)),
        };
        let mix = StageMix {
            stage,
            entries: entries.to_vec(),
        };
        mix.validate()?;
        Ok(mix)
    }

    pub fn validate(&self) -> Result<(), MixError> {
        if let Some((name, _)) = self.entries.iter().find(|(_, m)| *m == 0) {
            return Err(MixError::ZeroEntry {
                stage: self.stage,
                name,
            });
        }
        let sum: u32 = self.entries.iter().map(|(_, m)| m).sum();
        if sum != 1000 {
            return Err(MixError::BadSum {
                stage: self.stage,
                sum,
            });
        }
        Ok(())
    }

    /// (name, proportion) view.
    pub fn proportions(&self) -> Vec<(&'static str, f64)> {
        self.entries
            .iter()
            .map(|&(name, milli)| (name, milli as f64 / 1000.0))
        .collect()
    }

    pub fn proportion_of(&self, name: &str) -> f64 {
        self.entries
            .iter()
            .find(|(n, _)| *n == name)
            .map_or(0.0, |&(_, m)| m as f64 / 1000.0)
    }

    /// Exact combined mass of a set of names, in thousandths.
    pub fn mass_milli(&self, names: &[&str]) -> u32 {
        self.entries
            .iter()
            .filter(|(n, _)| names.contains(n))
            .map(|(_, m)| m)
            .sum()
    }

    /// One categorical draw.
    pub fn sample(&self, rng: &mut Rng) -> &'static str {
        let mut r = rng.below(1000) as u32;
        for &(name, milli) in &self.entries {
            if r < milli {
                return name;
            }
            r -= milli;
        }
        unreachable!("proportions sum to 1000")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn all_three_stages_sum_to_one() {
        for stage in 1..=3 {
            let mix = StageMix::for_stage(stage).unwrap();
            let total: f64 = mix.proportions().iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() <= 1e-9, "stage {stage}: {total}");
        }
    }

    #[test]
    fn unknown_stage_is_rejected() {
        assert_eq!(StageMix::for_stage(4), Err(MixError::UnknownStage(4)));
    }

    #[test]
    fn stage_three_matches_the_published_proportions() {
        let mix = StageMix::for_stage(3).unwrap();
        assert_eq!(mix.proportion_of("smmi"), 0.5);
        assert_eq!(mix.proportion_of("spmi"), 0.1);
        assert_eq!(mix.proportion_of("tgi"), 0.1);
        assert_eq!(mix.proportion_of("x2txs-i2t"), 0.06);
        assert_eq!(mix.proportion_of("x2txs-v2t"), 0.06);
        assert_eq!(mix.proportion_of("x2txs-a2t"), 0.03);
        assert_eq!(mix.proportion_of("x2txs-i2b"), 0.03);
        assert_eq!(mix.proportion_of("x2txs-i2m"), 0.03);
        assert_eq!(mix.proportion_of("t2txs-t2i"), 0.03);
        assert_eq!(mix.proportion_of("t2txs-t2v"), 0.03);
        assert_eq!(mix.proportion_of("t2txs-t2a"), 0.03);
    }

    #[test]
    fn stage_three_instruction_mass_is_exactly_seventy_percent() {
        let mix = StageMix::for_stage(3).unwrap();
        assert_eq!(mix.mass_milli(&["smmi", "spmi", "tgi"]), 700);
    }

    #[test]
    fn stage_one_has_no_tmm_flavors() {
        let mix = StageMix::for_stage(1).unwrap();
        for (name, _) in mix.proportions() {
            assert!(
                !name.contains("t2txs") && !name.contains("x2txs"),
                "{name}"
            );
            assert!(!matches!(name, "smmi" | "spmi" | "tgi"), "{name}");
        }
    }

    #[test]
    fn empirical_frequencies_track_proportions() {
        let mix = StageMix::for_stage(2).unwrap();
        let mut rng = Rng::new(99).substream("mix");
        let draws = 100_000;
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for _ in 0..draws {
            *counts.entry(mix.sample(&mut rng)).or_default() += 1;
        }
        for (name, p) in mix.proportions() {
            let freq = *counts.get(name).unwrap_or(&0) as f64 / draws as f64;
            assert!((freq - p).abs() <= 0.01, "{name}: {freq} vs {p}");
        }
    }
}
