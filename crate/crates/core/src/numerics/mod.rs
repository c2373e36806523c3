//! Deterministic tensor core: rank-2 tensors, tape autodiff, Adam, and a
//! finite-difference gradient oracle.

pub mod adam;
pub mod gradcheck;
pub mod graph;
pub mod tensor;

pub use adam::AdamState;
pub use graph::{Graph, Var, LAYER_NORM_EPS};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("{op}: shape mismatch {}x{} vs {}x{}", lhs.0, lhs.1, rhs.0, rhs.1)]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("tensor construction: {rows}x{cols} does not hold {len} values")]
    BadConstruction {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("degenerate vector: norm {norm:.3e} below 1e-12")]
    DegenerateVector { norm: f64 },
    #[error("backward requires a scalar loss, got {}x{}", shape.0, shape.1)]
    NonScalarLoss { shape: (usize, usize) },
    #[error("adam_step: {params} parameters vs {grads} state/gradient slots")]
    ParamCountMismatch { params: usize, grads: usize },
    #[error("{op}: non-finite value produced")]
    NonFinite { op: &'static str },
}
