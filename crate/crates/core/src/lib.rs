pub mod boundary;
pub mod bound_machinery;
pub mod error;
pub mod expcli;
pub mod levy_model;
pub mod oracles;
pub mod passage_mc;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod tilt_is;

pub use error::{Error, Result};
