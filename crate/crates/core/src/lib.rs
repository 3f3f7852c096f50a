//! Goal-oriented reduced-basis model order reduction for affine
//! parameter-dependent linear systems.

pub mod cli;
pub mod constants;
pub mod error;
pub mod estimators;
pub mod greedy;
pub mod linalg;
pub mod model;
pub mod preconditioner;
pub mod problems;
pub mod projectors;
pub mod spaces;
pub mod store;

pub use error::{Error, Result};
