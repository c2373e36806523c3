//! The dataset forge: synthetic source corpora, instruction pools,
//! instance construction, stage mixing, and pseudo dataset emission.

pub mod captions;
pub mod dataset;
pub mod instance;
pub mod mix;
pub mod pool;
pub mod pseudo;
pub mod synth;

pub use captions::{load_captions, save_captions, CaptionRecord, CaptionsError, SourceModality};
pub use dataset::{build_dataset, read_instances, write_instances, DatasetError};
pub use instance::{
    build_instance, build_travel_guide, concat_multi_sample, verify_instance, InstanceError,
    TmmInstance,
};
pub use mix::{MixError, StageMix};
pub use pool::{builtin_pool, load_pool, save_pool, Flavor, InstructionTemplate, PoolError};
pub use pseudo::{
    default_count, emit_pseudo_dataset, write_pseudo, PseudoError, PseudoRecord, RealizedAsset,
};
pub use synth::{city_list, synth_captions, synth_gallery, SourceKind, SynthError};
