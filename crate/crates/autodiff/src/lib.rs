//! Reverse-mode differentiation over dense row-major tensors.
//!
//! Models are written as ordinary Rust code calling op methods on a
//! [`Tape`]; [`Tape::backward`] then returns exact gradients for every
//! leaf. All ops are generic over [`Real`] so the same model runs in `f32`
//! for training and `f64` for finite-difference checks.

pub mod eigen;
mod error;
pub mod gradcheck;
pub mod ops;
mod param;
pub mod rng;
mod tape;
mod tensor;

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use error::{AutodiffError, Result};
pub use gradcheck::{
    cross_entropy_difference, grad_check, grad_check_cross_entropy, relative_error, GradCheckConfig, GradCheckReport,
    ParamCheck,
};
pub use ops::{sinusoidal_positions, AttentionWeights, BatchNormMode, BatchStats, TemporalConv};
pub use param::{Bound, ParamId, ParamStore, Parameter};
pub use rng::SeededRng;
pub use tape::{BackwardArgs, BackwardFn, Gradients, Tape, Var};
pub use tensor::{matmul_into, Real, Tensor};
