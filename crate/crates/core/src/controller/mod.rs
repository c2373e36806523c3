//! The efficient decoders-controller: a unified decoder projector
//! (K projection experts mixed by a softmax modality router over
//! learnable modality queries), fusion with the text-encoder embedding,
//! and the alignment/reconstruction cosine losses.

pub mod checkpoint;
pub mod config;
pub mod forward;
pub mod params;
pub mod train;

pub use checkpoint::{
    config_sidecar, load_checkpoint, load_checkpoint_expecting, save_checkpoint, CheckpointError,
};
pub use config::{ConfigError, ControllerConfig};
pub use forward::{BatchItem, ParamVars};
pub use params::{ControllerParams, ExpertLayer, ParamsError, RouterParams};
pub use train::{Controller, ControllerError, GroupInference, StepStats};
