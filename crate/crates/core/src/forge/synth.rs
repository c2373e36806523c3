//! Synthetic source corpora.
//!
//! Desk-scale stand-ins for the big caption datasets: templated captions
//! composed from fixed word tables. Captions are enumerated through a
//! stride that is coprime to the table size, so any prefix of the
//! sequence is duplicate-free; the seed only rotates the starting point.

use thiserror::Error;

use super::captions::{CaptionRecord, SourceModality};
use super::pool::Flavor;
use crate::pipeline::gallery::GalleryFileRecord;
use crate::template::Modality;

/// Which synthetic corpus to draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceKind {
    /// Image captions.
    Cc3m,
    /// Video captions.
    Webvid,
    /// Audio captions.
    Audiocap,
    /// Object names with image assets (box/mask sources).
    Coco,
    /// The bundled city list.
    Cities,
}

impl SourceKind {
    pub const ALL: [SourceKind; 5] = [
        SourceKind::Cc3m,
        SourceKind::Webvid,
        SourceKind::Audiocap,
        SourceKind::Coco,
        SourceKind::Cities,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SourceKind::Cc3m => "cc3m",
            SourceKind::Webvid => "webvid",
            SourceKind::Audiocap => "audiocap",
            SourceKind::Coco => "coco",
            SourceKind::Cities => "cities",
        }
    }

    /// The corpus a flavor forges from.
    pub fn for_flavor(flavor: Flavor) -> SourceKind {
        match flavor {
            Flavor::T2i | Flavor::I2t => SourceKind::Cc3m,
            Flavor::T2v | Flavor::V2t | Flavor::SmMi | Flavor::SpMi => SourceKind::Webvid,
            Flavor::T2a | Flavor::A2t => SourceKind::Audiocap,
            Flavor::I2b | Flavor::I2m => SourceKind::Coco,
            Flavor::Tgi => SourceKind::Cities,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("unknown source kind `{0}`")]
    UnknownKind(String),
    #[error("{kind} capacity is {capacity} distinct captions, {requested} requested")]
    Capacity {
        kind: &'static str,
        capacity: usize,
        requested: usize,
    },
}

impl std::str::FromStr for SourceKind {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SourceKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| SynthError::UnknownKind(s.to_string()))
    }
}

const ADJECTIVES: [&str; 16] = [
    "red", "blue", "golden", "rusty", "tiny", "huge", "bright", "quiet", "ancient", "modern",
    "striped", "fluffy", "wooden", "glass", "snowy", "crowded",
];

const NOUNS: [&str; 15] = [
    "bus", "cat", "dog", "bridge", "market", "mountain", "garden", "train", "boat", "lighthouse",
    "violin", "robot", "bakery", "forest", "fountain",
];

const IMAGE_VERBS: [&str; 12] = [
    "standing near", "parked beside", "resting under", "overlooking", "hidden behind",
    "floating past", "glowing above", "leaning against", "waiting outside", "circling around",
    "stacked next to", "planted before",
];

const VIDEO_VERBS: [&str; 12] = [
    "running through", "gliding across", "spinning inside", "marching along", "drifting over",
    "bouncing around", "diving into", "climbing up", "rolling down", "dancing across",
    "sailing past", "wandering through",
];

const PLACES: [&str; 10] = [
    "the harbor", "the old town", "a rainy street", "the river bank", "a sunny plaza",
    "the train station", "a quiet courtyard", "the city wall", "a mountain pass",
    "the night market",
];

const SOUND_SOURCES: [&str; 15] = [
    "a dog", "a violin", "heavy rain", "a crowd", "an engine", "a bell", "the wind", "a kettle",
    "footsteps", "a train", "thunder", "a choir", "an owl", "ocean waves", "radio static",
];

const SOUNDS: [&str; 12] = [
    "barking", "humming", "pattering", "cheering", "rumbling", "ringing", "howling", "whistling",
    "echoing", "clattering", "booming", "crackling",
];

const SOUND_CONTEXTS: [&str; 12] = [
    "in the distance", "inside a hall", "on a rooftop", "near the shore", "through a wall",
    "under the bridge", "at the station", "in a small room", "outside the window",
    "deep in the woods", "across the valley", "behind the curtain",
];

const COCO_COLORS: [&str; 12] = [
    "black", "white", "brown", "spotted", "golden", "gray", "orange", "silver", "green", "pale",
    "dark", "shaggy",
];

const COCO_OBJECTS: [&str; 20] = [
    "dog", "cat", "bicycle", "car", "pizza", "laptop", "umbrella", "horse", "sheep", "kite",
    "chair", "vase", "clock", "banana", "skateboard", "teddy bear", "traffic light", "boat",
    "bird", "backpack",
];

const CITY_STEMS: [&str; 40] = [
    "Alder", "Brynn", "Calder", "Dorin", "Elvas", "Farrow", "Gilden", "Harlow", "Iver", "Jasper",
    "Kelden", "Larkin", "Merrow", "Norvale", "Orin", "Pellam", "Quillon", "Ravena", "Selwyn",
    "Tormund", "Ulver", "Vanti", "Weslin", "Xanda", "Yelm", "Zephyr", "Arbor", "Bellmar",
    "Corvin", "Darel", "Emberly", "Fennic", "Galway", "Hollis", "Istria", "Juneau", "Kirwall",
    "Lumen", "Mistral", "Noctis",
];

const CITY_SUFFIXES: [&str; 25] = [
    "Bay", "Falls", "Harbor", "Heights", "Hollow", "Junction", "Keep", "Landing", "Meadow",
    "Mills", "Pass", "Point", "Ridge", "Shore", "Springs", "Summit", "Vale", "View", "Crossing",
    "Gardens", "Grove", "Haven", "Fields", "Bluff", "Terrace",
];

/// Decode a flat index into one pick per table.
fn mixed_radix(mut idx: usize, radices: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(radices.len());
    for &r in radices {
        out.push(idx % r);
        idx /= r;
    }
    out
}

/// Enumerate combinations in a seed-rotated order that repeats no index
/// within the first `capacity` steps: `idx_i = (start + i * stride) mod
/// capacity` with a stride coprime to the capacity.
fn walk(capacity: usize, seed: u64, i: usize) -> usize {
    let mut stride = (7919 % capacity).max(1); // 7919 is prime
    while gcd(stride, capacity) != 1 {
        stride = if stride + 1 == capacity { 1 } else { stride + 1 };
    }
    let start = (seed as usize) % capacity;
    (start + i * stride) % capacity
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn scene_caption(i: usize, seed: u64, verbs: &[&str]) -> String {
    let capacity = ADJECTIVES.len() * NOUNS.len() * verbs.len() * PLACES.len();
    let picks = mixed_radix(
        walk(capacity, seed, i),
        &[ADJECTIVES.len(), NOUNS.len(), verbs.len(), PLACES.len()],
    );
    format!(
        "a {} {} {} {}",
        ADJECTIVES[picks[0]], NOUNS[picks[1]], verbs[picks[2]], PLACES[picks[3]]
    )
}

fn audio_caption(i: usize, seed: u64) -> String {
    let capacity = SOUND_SOURCES.len() * SOUNDS.len() * SOUND_CONTEXTS.len();
    let picks = mixed_radix(
        walk(capacity, seed, i),
        &[SOUND_SOURCES.len(), SOUNDS.len(), SOUND_CONTEXTS.len()],
    );
    format!(
        "{} {} {}",
        SOUND_SOURCES[picks[0]], SOUNDS[picks[1]], SOUND_CONTEXTS[picks[2]]
    )
}

fn coco_caption(i: usize, seed: u64) -> String {
    let capacity = COCO_COLORS.len() * COCO_OBJECTS.len();
    let picks = mixed_radix(
        walk(capacity, seed, i),
        &[COCO_COLORS.len(), COCO_OBJECTS.len()],
    );
    format!("{} {}", COCO_COLORS[picks[0]], COCO_OBJECTS[picks[1]])
}

/// The bundled list of exactly 1000 distinct city names.
pub fn city_list() -> Vec<String> {
    let mut out = Vec::with_capacity(CITY_STEMS.len() * CITY_SUFFIXES.len());
    for stem in CITY_STEMS {
        for suffix in CITY_SUFFIXES {
            out.push(format!("{stem} {suffix}"));
        }
    }
    out
}

fn capacity(kind: SourceKind) -> usize {
    match kind {
        SourceKind::Cc3m => ADJECTIVES.len() * NOUNS.len() * IMAGE_VERBS.len() * PLACES.len(),
        SourceKind::Webvid => ADJECTIVES.len() * NOUNS.len() * VIDEO_VERBS.len() * PLACES.len(),
        SourceKind::Audiocap => SOUND_SOURCES.len() * SOUNDS.len() * SOUND_CONTEXTS.len(),
        SourceKind::Coco => COCO_COLORS.len() * COCO_OBJECTS.len(),
        SourceKind::Cities => CITY_STEMS.len() * CITY_SUFFIXES.len(),
    }
}

/// Generate `count` caption records (captions duplicate-free per call).
pub fn synth_captions(kind: SourceKind, count: usize, seed: u64) -> Vec<CaptionRecord> {
    let (prefix, modality): (&str, SourceModality) = match kind {
        SourceKind::Cc3m => ("img", SourceModality::Image),
        SourceKind::Webvid => ("vid", SourceModality::Video),
        SourceKind::Audiocap => ("aud", SourceModality::Audio),
        SourceKind::Coco => ("cimg", SourceModality::Image),
        SourceKind::Cities => ("city", SourceModality::Text),
    };
    let cities = if kind == SourceKind::Cities {
        city_list()
    } else {
        Vec::new()
    };
    (0..count)
        .map(|i| {
            let caption = match kind {
                SourceKind::Cc3m => scene_caption(i, seed, &IMAGE_VERBS),
                SourceKind::Webvid => scene_caption(i, seed, &VIDEO_VERBS),
                SourceKind::Audiocap => audio_caption(i, seed),
                SourceKind::Coco => coco_caption(i, seed),
                SourceKind::Cities => cities[i % cities.len()].clone(),
            };
            let asset_ref = match kind {
                SourceKind::Cities => String::new(),
                _ => format!("{prefix}_{i:05}"),
            };
            CaptionRecord {
                id: format!("{}_{i:05}", kind.name()),
                caption,
                source_modality: modality,
                asset_ref,
            }
        })
        .collect()
}

/// Generate a gallery of `count` assets cycling through all five
/// modalities, with captions drawn from the matching caption corpus.
pub fn synth_gallery(count: usize, seed: u64) -> Result<Vec<GalleryFileRecord>, SynthError> {
    let per_modality = count.div_ceil(Modality::ALL.len());
    for (kind, used) in [
        (SourceKind::Cc3m, per_modality),
        (SourceKind::Audiocap, per_modality),
        (SourceKind::Webvid, per_modality),
        (SourceKind::Coco, 2 * per_modality),
    ] {
        if used > capacity(kind) {
            return Err(SynthError::Capacity {
                kind: kind.name(),
                capacity: capacity(kind),
                requested: used,
            });
        }
    }
    let mut counters = [0usize; 5];
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let modality = Modality::ALL[i % Modality::ALL.len()];
        let slot = &mut counters[i % Modality::ALL.len()];
        let j = *slot;
        *slot += 1;
        let (prefix, caption) = match modality {
            Modality::Image => ("img", scene_caption(j, seed, &IMAGE_VERBS)),
            Modality::Audio => ("aud", audio_caption(j, seed)),
            Modality::Video => ("vid", scene_caption(j, seed, &VIDEO_VERBS)),
            // Box and mask assets are annotations named by object; offset
            // the mask walk so the two caption sets differ.
            Modality::Box => ("box", coco_caption(j, seed)),
            Modality::Mask => ("msk", coco_caption(j, seed.wrapping_add(97))),
        };
        out.push(GalleryFileRecord {
            asset_ref: format!("{prefix}_{j:04}"),
            modality,
            caption,
        });
    }
    Ok(out)
}
