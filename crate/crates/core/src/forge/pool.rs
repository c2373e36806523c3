//! Instruction pools: one authored pattern inventory per dataset flavor.
//!
//! Every pattern carries exactly one `{}` placeholder. The placeholder
//! receives the sample content (a caption, a request list, an answer
//! skeleton, or a city name depending on the flavor), which is what lets
//! the rule-based planner invert a forged question back into target
//! modalities and content.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::template::{Modality, TaskPrompt};

/// One entry of an instruction pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionTemplate {
    /// Text with exactly one `{}` placeholder.
    pub pattern: String,
    pub task_prompt: TaskPrompt,
    /// Ordered multiset of output modalities (empty only for `[TEXT]`).
    pub target_modalities: Vec<Modality>,
    /// Input wrapper the question must carry, if any.
    #[serde(default)]
    pub requires_input_modality: Option<Modality>,
}

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("pool file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("template `{pattern}`: expected exactly one {{}} placeholder")]
    PlaceholderCount { pattern: String },
    #[error("template `{pattern}`: empty target modalities on a non-text task")]
    EmptyTargets { pattern: String },
}

impl InstructionTemplate {
    pub fn validate(&self) -> Result<(), PoolError> {
        if self.pattern.matches("{}").count() != 1 {
            return Err(PoolError::PlaceholderCount {
                pattern: self.pattern.clone(),
            });
        }
        if self.target_modalities.is_empty() && self.task_prompt != TaskPrompt::Text {
            return Err(PoolError::EmptyTargets {
                pattern: self.pattern.clone(),
            });
        }
        Ok(())
    }

    /// Pattern halves around the placeholder.
    pub fn halves(&self) -> (&str, &str) {
        self.pattern.split_once("{}").expect("validated pattern")
    }

    /// Substitute the placeholder.
    pub fn instantiate(&self, content: &str) -> String {
        let (prefix, suffix) = self.halves();
        format!("{prefix}{content}{suffix}")
    }

    /// Recover the content if `instruction` matches this pattern.
    pub fn invert<'a>(&self, instruction: &'a str) -> Option<&'a str> {
        let (prefix, suffix) = self.halves();
        let content = instruction.strip_prefix(prefix)?.strip_suffix(suffix)?;
        if content.is_empty() {
            None
        } else {
            Some(content)
        }
    }
}

/// The eleven dataset flavors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flavor {
    T2i,
    T2v,
    T2a,
    I2t,
    V2t,
    A2t,
    I2b,
    I2m,
    SmMi,
    SpMi,
    Tgi,
}

impl Flavor {
    pub const ALL: [Flavor; 11] = [
        Flavor::T2i,
        Flavor::T2v,
        Flavor::T2a,
        Flavor::I2t,
        Flavor::V2t,
        Flavor::A2t,
        Flavor::I2b,
        Flavor::I2m,
        Flavor::SmMi,
        Flavor::SpMi,
        Flavor::Tgi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Flavor::T2i => "t2txs-t2i",
            Flavor::T2v => "t2txs-t2v",
            Flavor::T2a => "t2txs-t2a",
            Flavor::I2t => "x2txs-i2t",
            Flavor::V2t => "x2txs-v2t",
            Flavor::A2t => "x2txs-a2t",
            Flavor::I2b => "x2txs-i2b",
            Flavor::I2m => "x2txs-i2m",
            Flavor::SmMi => "smmi",
            Flavor::SpMi => "spmi",
            Flavor::Tgi => "tgi",
        }
    }

    /// Input wrapper modality of the flavor's questions, if any.
    pub fn input_modality(self) -> Option<Modality> {
        match self {
            Flavor::I2t | Flavor::I2b | Flavor::I2m => Some(Modality::Image),
            Flavor::V2t => Some(Modality::Video),
            Flavor::A2t => Some(Modality::Audio),
            _ => None,
        }
    }

    /// Flavors whose instances concatenate several samples.
    pub fn is_multi_sample(self) -> bool {
        matches!(self, Flavor::SmMi | Flavor::SpMi)
    }
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("unknown flavor `{0}` (expected one of t2txs-t2i, t2txs-t2v, t2txs-t2a, x2txs-i2t, x2txs-v2t, x2txs-a2t, x2txs-i2b, x2txs-i2m, smmi, spmi, tgi)")]
pub struct UnknownFlavor(String);

impl FromStr for Flavor {
    type Err = UnknownFlavor;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Flavor::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| UnknownFlavor(s.to_string()))
    }
}

use Modality::{Audio as A, Box as B, Image as I, Mask as M, Video as V};

fn t(
    pattern: &str,
    task: TaskPrompt,
    targets: &[Modality],
    input: Option<Modality>,
) -> InstructionTemplate {
    InstructionTemplate {
        pattern: pattern.to_string(),
        task_prompt: task,
        target_modalities: targets.to_vec(),
        requires_input_modality: input,
    }
}

fn single(pattern: &str, target: Modality, input: Option<Modality>) -> InstructionTemplate {
    let task = match target {
        I => TaskPrompt::Image,
        A => TaskPrompt::Audio,
        V => TaskPrompt::Video,
        B => TaskPrompt::Box,
        M => TaskPrompt::Mask,
    };
    t(pattern, task, &[target], input)
}

fn smart(pattern: &str, targets: &[Modality], input: Option<Modality>) -> InstructionTemplate {
    t(pattern, TaskPrompt::SmartMultimodal, targets, input)
}

fn text(pattern: &str, input: Modality) -> InstructionTemplate {
    t(pattern, TaskPrompt::Text, &[], Some(input))
}

fn pool_t2i() -> Vec<InstructionTemplate> {
    vec![
        smart(
            "Please generate an image and a video based on the following text: {}",
            &[I, V],
            None,
        ),
        single("Please generate an image based on the following text: {}", I, None),
        single("Draw a picture of {}", I, None),
        single("Create an image showing {}", I, None),
        single("I would like to see an image of {}", I, None),
        single("Render an illustration of {}", I, None),
        single("Produce a photo of {}", I, None),
        single("Show me a picture of {}", I, None),
        single("Generate an image depicting {}", I, None),
        single("Make an image for this description: {}", I, None),
        single("Visualize the following scene: {}", I, None),
        single("Paint a scene of {}", I, None),
        single("Can you draw {}", I, None),
        single("Turn this caption into an image: {}", I, None),
        single("I need an illustration of {}", I, None),
        single("Sketch {}", I, None),
        single("Please create a picture from this text: {}", I, None),
        single("Generate an image of {} for me", I, None),
        single("An image, please: {}", I, None),
        smart(
            "Please generate an image and an audio based on the following text: {}",
            &[I, A],
            None,
        ),
        smart(
            "Please generate an image, an audio and a video based on the following text: {}",
            &[I, A, V],
            None,
        ),
        smart("Create an image and then a second image of {}", &[I, I], None),
        smart("Illustrate {} with an image and a video", &[I, V], None),
        smart("Give me an image and a sound of {}", &[I, A], None),
    ]
}

fn pool_t2v() -> Vec<InstructionTemplate> {
    vec![
        single("Please generate a video based on the following text: {}", V, None),
        single("Create a video showing {}", V, None),
        single("Produce a short clip of {}", V, None),
        single("Show me a video of {}", V, None),
        single("Generate a video depicting {}", V, None),
        single("Make a video for this description: {}", V, None),
        single("Animate the following scene: {}", V, None),
        single("Film {}", V, None),
        single("I would like to watch a video of {}", V, None),
        single("Turn this caption into a video: {}", V, None),
        single("Render a clip of {}", V, None),
        single("I need a video of {}", V, None),
        single("Please create a video from this text: {}", V, None),
        single("Generate a video of {} for me", V, None),
        single("A video, please: {}", V, None),
        single("Record a scene of {}", V, None),
        single("Can you animate {}", V, None),
        smart(
            "Please generate a video and an image based on the following text: {}",
            &[V, I],
            None,
        ),
        smart(
            "Please generate a video and an audio based on the following text: {}",
            &[V, A],
            None,
        ),
        smart(
            "Please generate a video, an image and an audio based on the following text: {}",
            &[V, I, A],
            None,
        ),
        smart("Show {} as a video and an image", &[V, I], None),
        smart("Give me a video and a sound of {}", &[V, A], None),
        smart("Create two videos of {}", &[V, V], None),
        smart("Make a clip and a still image of {}", &[V, I], None),
    ]
}

fn pool_t2a() -> Vec<InstructionTemplate> {
    vec![
        single("Please generate an audio based on the following text: {}", A, None),
        single("Create an audio clip of {}", A, None),
        single("Produce a sound of {}", A, None),
        single("Let me hear {}", A, None),
        single("Generate an audio depicting {}", A, None),
        single("Make an audio for this description: {}", A, None),
        single("Synthesize the sound of {}", A, None),
        single("I would like to hear {}", A, None),
        single("Turn this caption into an audio: {}", A, None),
        single("Render a sound clip of {}", A, None),
        single("I need an audio of {}", A, None),
        single("Please create an audio from this text: {}", A, None),
        single("Generate an audio of {} for me", A, None),
        single("An audio, please: {}", A, None),
        single("Play the sound of {}", A, None),
        single("Can you voice {}", A, None),
        single("Compose the soundscape of {}", A, None),
        smart(
            "Please generate an audio and an image based on the following text: {}",
            &[A, I],
            None,
        ),
        smart(
            "Please generate an audio and a video based on the following text: {}",
            &[A, V],
            None,
        ),
        smart(
            "Please generate an audio, an image and a video based on the following text: {}",
            &[A, I, V],
            None,
        ),
        smart("Give me a sound and an image of {}", &[A, I], None),
        smart("Let me hear and watch {}", &[A, V], None),
        smart("Create two audio clips of {}", &[A, A], None),
        smart("Make a sound and a clip of {}", &[A, V], None),
    ]
}

fn pool_x2t(input: Modality, noun: &str) -> Vec<InstructionTemplate> {
    let some = Some(input);
    vec![
        text(&format!("Describe this {noun}. Reference description: {{}}"), input),
        text(&format!("Write a caption for this {noun} similar to: {{}}"), input),
        text(&format!("What does this {noun} contain? Hint: {{}}"), input),
        text(&format!("Caption this {noun}; a close caption reads: {{}}"), input),
        single(&format!("Generate an image similar to this {noun}, showing {{}}"), I, some),
        single(&format!("Show me an image like this {noun} depicting {{}}"), I, some),
        single(&format!("Recreate this {noun} as an image of {{}}"), I, some),
        single(&format!("Generate a video based on this {noun}, showing {{}}"), V, some),
        single(&format!("Animate this {noun} into a video of {{}}"), V, some),
        single(&format!("Generate an audio matching this {noun}, sounding like {{}}"), A, some),
        smart(
            &format!("Generate an image and a video that are similar to this {noun}, depicting {{}}"),
            &[I, V],
            some,
        ),
        smart(&format!("From this {noun}, produce an image and an audio of {{}}"), &[I, A], some),
        smart(&format!("From this {noun}, produce a video and an audio of {{}}"), &[V, A], some),
        smart(
            &format!("Expand this {noun} into an image, an audio and a video of {{}}"),
            &[I, A, V],
            some,
        ),
        smart(&format!("Give me two image variations of this {noun} showing {{}}"), &[I, I], some),
        smart(&format!("Turn this {noun} into a clip and a matching image of {{}}"), &[V, I], some),
        smart(&format!("Echo this {noun} as an audio and an image of {{}}"), &[A, I], some),
    ]
}

fn pool_i2b() -> Vec<InstructionTemplate> {
    let some = Some(I);
    [
        "Detect the {} in this image",
        "Find the {} in this image",
        "Locate the {}",
        "Draw a bounding box around the {}",
        "Where is the {} in this image",
        "Mark the {} with a box",
        "Box the {}",
        "Identify the position of the {}",
        "Give me the bounding box of the {}",
        "Outline the {} with a rectangle",
        "Point out the {} in this picture",
        "Detect every {} here",
        "Show the location of the {}",
        "Highlight the {} with a bounding box",
        "Return a box for the {}",
        "Spot the {} in the image",
        "Frame the {}",
        "Annotate the {} with a box",
    ]
    .iter()
    .map(|p| single(p, B, some))
    .collect()
}

fn pool_i2m() -> Vec<InstructionTemplate> {
    let some = Some(I);
    [
        "Segment the {} in this image",
        "Give me the mask of the {}",
        "Extract a segmentation mask for the {}",
        "Mask out the {}",
        "Produce a pixel mask of the {}",
        "Cut out the {} from this image",
        "Generate the segmentation of the {}",
        "Isolate the {} with a mask",
        "Return the mask for the {}",
        "Create a mask covering the {}",
        "Outline the exact shape of the {}",
        "Provide a mask showing where the {} is",
        "Segment out every {}",
        "Provide the silhouette mask of the {}",
        "Trace the {} precisely with a mask",
        "Make a segmentation mask for the {}",
    ]
    .iter()
    .map(|p| single(p, M, some))
    .collect()
}

fn pool_smmi() -> Vec<InstructionTemplate> {
    let frames = [
        "Please generate the following: {}",
        "I would like all of these at once: {}",
        "Create each of these items: {}",
        "Produce the following set: {}",
        "In a single response, give me {}",
        "Generate this combination: {}",
    ];
    let combos: [&[Modality]; 4] = [&[I, V], &[I, A], &[A, V], &[I, A, V]];
    let mut out = Vec::with_capacity(24);
    for frame in frames {
        for combo in combos {
            out.push(smart(frame, combo, None));
        }
    }
    out
}

fn pool_spmi() -> Vec<InstructionTemplate> {
    let entries: [(&str, &[Modality]); 5] = [
        ("Please answer strictly in the following format: {}", &[I, V]),
        ("Reply exactly in this format: {}", &[I, A]),
        ("Fill in this answer template: {}", &[A, V]),
        ("Use exactly this output format: {}", &[I, A, V]),
        ("Respond following this exact format: {}", &[V, I]),
    ];
    entries
        .iter()
        .map(|(p, targets)| t(p, TaskPrompt::SpecificMultimodal, targets, None))
        .collect()
}

fn pool_tgi() -> Vec<InstructionTemplate> {
    [
        "Please provide me a travel guide for {}",
        "Give me a travel guide for {}",
        "I am planning a trip to {}, please prepare a travel guide",
        "Show me a multimodal travel guide for {}",
        "Create a travel guide for {}",
        "I want to visit {}, make me a travel guide",
    ]
    .iter()
    .map(|p| smart(p, &[I, A, V], None))
    .collect()
}

/// The bundled pool of a flavor. Pool sizes are fixed:
/// 24 for each text-to-many flavor, 17 for each captioning flavor,
/// 18 for box, 16 for mask, 24 smart-multimodal, 5 specific-multimodal,
/// 6 travel-guide.
pub fn builtin_pool(flavor: Flavor) -> Vec<InstructionTemplate> {
    match flavor {
        Flavor::T2i => pool_t2i(),
        Flavor::T2v => pool_t2v(),
        Flavor::T2a => pool_t2a(),
        Flavor::I2t => pool_x2t(I, "image"),
        Flavor::V2t => pool_x2t(V, "video"),
        Flavor::A2t => pool_x2t(A, "audio"),
        Flavor::I2b => pool_i2b(),
        Flavor::I2m => pool_i2m(),
        Flavor::SmMi => pool_smmi(),
        Flavor::SpMi => pool_spmi(),
        Flavor::Tgi => pool_tgi(),
    }
}

/// Load a pool from a JSON array file and validate every entry.
pub fn load_pool(path: &Path) -> Result<Vec<InstructionTemplate>, PoolError> {
    let text = fs::read_to_string(path)?;
    let pool: Vec<InstructionTemplate> = serde_json::from_str(&text)?;
    for template in &pool {
        template.validate()?;
    }
    Ok(pool)
}

/// Write a pool as pretty-printed JSON.
pub fn save_pool(path: &Path, pool: &[InstructionTemplate]) -> Result<(), PoolError> {
    let json = serde_json::to_string_pretty(pool)?;
    fs::write(path, json + "\n")?;
    Ok(())
}
