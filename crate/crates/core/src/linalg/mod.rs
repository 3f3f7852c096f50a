//! Sparse storage, banded factorizations and small dense kernels.

pub mod band;
pub mod dense;
pub mod sparse;

pub use band::{BandCholesky, BandLu};
pub use dense::{DenseLu, CONDITION_LIMIT};
pub use sparse::CsrMatrix;
