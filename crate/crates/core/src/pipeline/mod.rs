//! The end-to-end mock pipeline: deterministic encoders, a rule-based
//! planner, the asset gallery with nearest-neighbor decoding, and the
//! runner that ties them to the controller.

pub mod encoders;
pub mod gallery;
pub mod planner;
pub mod runner;
pub mod training;

pub use encoders::{EncodeError, MockEncoders, ENCODER_SEED};
pub use gallery::{AssetRecord, Gallery, GalleryError, GalleryFileRecord};
pub use planner::{PlanError, Planner};
pub use runner::{run_pipeline, PipelineError, PipelineResult, RealizedGroup};
pub use training::{assemble_items, pilot_items_from_gallery, train_loop, TrainingDataError};
