//! Deterministic mock encoders.
//!
//! These stand in for the pretrained text encoder, the unified modality
//! encoder with its linear encoder projectors, and the LLM hidden state
//! of a signal prompt. Each is a frozen projection whose rows are drawn
//! lazily from named substreams of one fixed seed, so any process that
//! constructs them with the same dimensions sees bit-identical outputs.
//! All encodings are L2-normalized, which keeps the cosine objectives
//! well-posed and makes the alpha = 0 retrieval path exact.

use thiserror::Error;

use crate::numerics::Tensor;
use crate::rng::Rng;
use crate::template::{Modality, QuestionMessage};

/// Mock encoders are frozen artifacts, not per-run randomness: every
/// binary derives them from this constant, never from the CLI seed.
pub const ENCODER_SEED: u64 = 0x5350_4944_4552_2d31; // "SPIDER-1"

/// Weight of the random off-diagonal mix in the hidden-state map. The
/// map keeps the context direction dominant so the reconstruction
/// objective is solvable within a short pilot budget, while still
/// entangling coordinates and carrying a modality-dependent shift.
const HIDDEN_MIX: f64 = 0.1;
/// Magnitude of the per-modality shift rows of the hidden-state map.
const HIDDEN_MODALITY_SHIFT: f64 = 0.15;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("cannot encode an empty string")]
    EmptyText,
}

/// Frozen projections for text, modality assets, and LLM hidden states.
#[derive(Debug, Clone)]
pub struct MockEncoders {
    d: usize,
    d_c: usize,
    seed: u64,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

impl MockEncoders {
    pub fn new(d: usize, d_c: usize) -> Self {
        MockEncoders {
            d,
            d_c,
            seed: ENCODER_SEED,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn d_c(&self) -> usize {
        self.d_c
    }

    /// One frozen projection row, regenerated on demand.
    fn row(&self, stream: &str, index: u64, len: usize) -> Vec<f64> {
        let mut rng = Rng::new(self.seed).substream(&format!("{stream}:{index}"));
        (0..len).map(|_| rng.uniform(-1.0, 1.0)).collect()
    }

    /// Text into decoder-conditioning space: hash each whitespace token
    /// to a projection row, sum, L2-normalize.
    pub fn encode_text(&self, text: &str) -> Result<Tensor, EncodeError> {
        let mut acc = vec![0.0; self.d_c];
        let mut any = false;
        for token in text.split_whitespace() {
            any = true;
            let row = self.row("text", fnv1a(token.as_bytes()), self.d_c);
            for (a, r) in acc.iter_mut().zip(&row) {
                *a += r;
            }
        }
        if !any {
            return Err(EncodeError::EmptyText);
        }
        Tensor::new(1, self.d_c, acc)
            .expect("shape")
            .l2_normalized()
            .map_err(|_| EncodeError::EmptyText)
    }

    /// Asset into LLM space: the projection of a two-hot feature
    /// (hashed asset ref + modality), L2-normalized.
    pub fn encode_modality(&self, asset_ref: &str, modality: Modality) -> Tensor {
        let mut acc = self.row("asset", fnv1a(asset_ref.as_bytes()), self.d);
        let shift = self.row("asset-modality", modality as u64, self.d);
        for (a, s) in acc.iter_mut().zip(&shift) {
            *a += s;
        }
        Tensor::new(1, self.d, acc)
            .expect("shape")
            .l2_normalized()
            .expect("two-hot projection is nonzero")
    }

    /// Lift a text encoding into LLM space (for questions without an
    /// input asset).
    pub fn lift_text(&self, text: &str) -> Result<Tensor, EncodeError> {
        let t = self.encode_text(text)?;
        let mut acc = vec![0.0; self.d];
        for (i, &v) in t.data().iter().enumerate() {
            let row = self.row("lift", i as u64, self.d);
            for (a, r) in acc.iter_mut().zip(&row) {
                *a += v * r;
            }
        }
        Tensor::new(1, self.d, acc)
            .expect("shape")
            .l2_normalized()
            .map_err(|_| EncodeError::EmptyText)
    }

    /// Context vector of a question: the input asset's encoder embedding
    /// when present, otherwise the lifted instruction text.
    pub fn question_context(&self, question: &QuestionMessage) -> Result<Tensor, EncodeError> {
        match &question.input_asset {
            Some(asset) => Ok(self.encode_modality(&asset.asset_ref, asset.modality)),
            None => self.lift_text(&question.instruction),
        }
    }

    /// Mock LLM hidden state of a signal prompt: the frozen map applied
    /// to (context | modality one-hot), normalized and replicated to
    /// `l` rows.
    pub fn llm_hidden(&self, context: &Tensor, modality: Modality, l: usize) -> Tensor {
        debug_assert_eq!(context.shape(), (1, self.d));
        // Raw projection rows have expected norm sqrt(d/3); rescale so
        // the mix constants are relative to the unit-norm context.
        let row_scale = (3.0 / self.d as f64).sqrt();
        let mut acc = vec![0.0; self.d];
        // Context rows: dominant identity plus a random mix.
        for (i, &v) in context.data().iter().enumerate() {
            acc[i] += v;
            let row = self.row("hidden", i as u64, self.d);
            for (a, r) in acc.iter_mut().zip(&row) {
                *a += HIDDEN_MIX * row_scale * v * r;
            }
        }
        // One-hot rows: a per-modality shift.
        let shift = self.row("hidden-modality", modality as u64, self.d);
        for (a, s) in acc.iter_mut().zip(&shift) {
            *a += HIDDEN_MODALITY_SHIFT * row_scale * s;
        }
        let row = Tensor::new(1, self.d, acc)
            .expect("shape")
            .l2_normalized()
            .expect("context plus shift is nonzero");
        let mut data = Vec::with_capacity(l * self.d);
        for _ in 0..l {
            data.extend_from_slice(row.data());
        }
        Tensor::new(l, self.d, data).expect("shape")
    }

    /// Hidden state for one answer group of a question.
    pub fn llm_hidden_for_question(
        &self,
        question: &QuestionMessage,
        modality: Modality,
        l: usize,
    ) -> Result<Tensor, EncodeError> {
        let context = self.question_context(question)?;
        Ok(self.llm_hidden(&context, modality, l))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc() -> MockEncoders {
        MockEncoders::new(16, 8)
    }

    #[test]
    fn text_encoding_is_deterministic_and_unit_norm() {
        let e = enc();
        let a = e.encode_text("a cat on a couch").unwrap();
        let b = e.encode_text("a cat on a couch").unwrap();
        assert_eq!(a, b);
        assert!((a.l2_norm() - 1.0).abs() <= 1e-12);
        let fresh = MockEncoders::new(16, 8);
        assert_eq!(fresh.encode_text("a cat on a couch").unwrap(), a);
    }

    #[test]
    fn empty_text_is_rejected() {
        assert_eq!(enc().encode_text("   "), Err(EncodeError::EmptyText));
    }

    #[test]
    fn distinct_captions_encode_distinctly() {
        let e = enc();
        let a = e.encode_text("a red bus").unwrap();
        let b = e.encode_text("a blue bus").unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn modality_encoding_unit_norm_and_distinct() {
        let e = enc();
        let a = e.encode_modality("img_0001", Modality::Image);
        assert!((a.l2_norm() - 1.0).abs() <= 1e-12);
        let b = e.encode_modality("img_0002", Modality::Image);
        let c = e.encode_modality("img_0001", Modality::Video);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, e.encode_modality("img_0001", Modality::Image));
    }

    #[test]
    fn hidden_state_shape_and_determinism() {
        let e = enc();
        let ctx = e.encode_modality("vid_7", Modality::Video);
        let h = e.llm_hidden(&ctx, Modality::Image, 3);
        assert_eq!(h.shape(), (3, 16));
        assert_eq!(h.row_slice(0), h.row_slice(2));
        assert!((Tensor::row(h.row_slice(0)).l2_norm() - 1.0).abs() <= 1e-12);
        assert_eq!(h, e.llm_hidden(&ctx, Modality::Image, 3));
        assert_ne!(
            h.row_slice(0),
            e.llm_hidden(&ctx, Modality::Audio, 1).row_slice(0)
        );
    }
}
