//! Reverse-mode automatic differentiation over real matrices.
//!
//! Complex signals are carried as pairs of real nodes ([`CVar`]) and
//! differentiated in the real domain, so every gradient can be checked
//! against real-valued finite differences ([`gradcheck`]).

mod adam;
mod complex;
pub mod gradcheck;
mod matrix;
mod tape;

pub use adam::Adam;
pub use complex::CVar;
pub use matrix::{cmatmul, CTensor, Matrix};
pub use tape::{ElementMap, Gradients, Im2Col, RadialMap, Tape, Unary, Var};
