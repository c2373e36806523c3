//! Desk-scale any-to-many modality generation toolkit.
//!
//! The crate provides four layers that compose into an end-to-end
//! pipeline without any pretrained models:
//!
//! * [`template`] — the signal-token grammar for questions and
//!   text-formatted many-modal answers (parse, serialize, validate);
//! * [`numerics`] — a deterministic rank-2 tensor core with tape
//!   autodiff, Adam, and a finite-difference gradient oracle;
//! * [`controller`] — the decoders-controller: a mixture of projection
//!   experts with a softmax router over learnable modality queries,
//!   fused with text-encoder embeddings and trained by two cosine
//!   losses;
//! * [`pipeline`] + [`forge`] — deterministic mock encoders, a
//!   rule-based planner, nearest-neighbor decoding over an asset
//!   gallery, and the dataset forge that manufactures instruction
//!   corpora and stage mixtures.
//!
//! Everything is reproducible from a single seed; see [`rng`].

pub mod controller;
pub mod forge;
pub mod numerics;
pub mod pipeline;
pub mod rng;
pub mod template;
