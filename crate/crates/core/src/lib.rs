//! Giant atoms coupled to a one-dimensional waveguide at several points.

// `!(x > 0.0)` is how NaN gets rejected along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod delay;
pub mod design;
pub mod error;
pub mod grid;
pub mod lindblad;
pub mod model;
pub mod multiatom;
pub mod optim;
pub mod oracle;
pub mod output;
pub mod peaks;
pub mod spectral;

pub use error::{Error, Result};
