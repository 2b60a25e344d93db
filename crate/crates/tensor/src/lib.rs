//! Dense `f64` matrices and a reverse-mode autodiff tape.
//!
//! Everything is rank ≤ 2; vectors are `1×n` or `n×1` matrices and
//! multi-head structure is expressed with [`Tape::split`] and [`Tape::concat`].

mod error;
mod gradcheck;
mod matrix;
mod tape;

pub use error::TensorError;
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use matrix::Matrix;
pub use tape::{sigmoid, Gradients, OpKind, Tape, Var};
