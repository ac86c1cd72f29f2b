//! Differentiable operations, each implemented as methods on [`crate::Tape`].

mod attention;
mod classify;
mod conv;
mod elementwise;
mod graph;
mod linalg;
mod norm;
mod recurrent;
mod shape;

pub use attention::{sinusoidal_positions, AttentionWeights};
pub use conv::TemporalConv;
pub use graph::DEGREE_EPS;
pub use norm::{BatchNormMode, BatchStats, NORM_EPS};
