//! Reduced bases kept orthonormal in the `R_V0` inner product.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::model::mtx;

/// Relative residual norm below which a candidate column is rejected.
pub const DEFAULT_TOL_RANK: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Basis {
    gram: Arc<CsrMatrix>,
    cols: DMatrix<f64>,
    tol_rank: f64,
}

impl Basis {
    pub fn new(gram: Arc<CsrMatrix>, tol_rank: f64) -> Self {
        let n = gram.nrows();
        Self { gram, cols: DMatrix::zeros(n, 0), tol_rank }
    }

    /// Wraps columns that are already orthonormal in `gram`.
    pub fn from_columns(gram: Arc<CsrMatrix>, cols: DMatrix<f64>, tol_rank: f64) -> Result<Self> {
        if cols.nrows() != gram.nrows() {
            return Err(Error::Shape(format!(
                "basis has {} rows, Gram matrix is {}x{}",
                cols.nrows(),
                gram.nrows(),
                gram.ncols()
            )));
        }
        let b = Self { gram, cols, tol_rank };
        let dev = (b.gram_matrix() - DMatrix::identity(b.dim(), b.dim())).amax();
        if dev > 1e-8 {
            return Err(Error::Config(format!(
                "basis columns are not orthonormal (deviation {dev:.3e})"
            )));
        }
        Ok(b)
    }

    pub fn n(&self) -> usize {
        self.cols.nrows()
    }

    pub fn dim(&self) -> usize {
        self.cols.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.cols
    }

    pub fn tol_rank(&self) -> f64 {
        self.tol_rank
    }

    pub fn gram(&self) -> &Arc<CsrMatrix> {
        &self.gram
    }

    /// `Bᵀ G B`, the identity up to rounding.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        self.cols.transpose() * self.gram.mul_dense(&self.cols)
    }

    /// Two passes of classical Gram–Schmidt in the `G` inner product. The
    /// candidate is rejected when its residual norm is at most
    /// `tol_rank · ‖v‖_G`.
    pub fn orthonormalize_append(&mut self, v: &DVector<f64>) -> bool {
        assert_eq!(v.len(), self.n(), "candidate length");
        let norm0 = v.dot(&self.gram.mul_vec(v)).max(0.0).sqrt();
        if !(norm0 > 0.0) || !norm0.is_finite() {
            return false;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            if self.dim() == 0 {
                break;
            }
            let c = self.cols.tr_mul(&self.gram.mul_vec(&w));
            w -= &self.cols * c;
        }
        let norm = w.dot(&self.gram.mul_vec(&w)).max(0.0).sqrt();
        if norm <= self.tol_rank * norm0 {
            return false;
        }
        w /= norm;
        let m = self.dim();
        self.cols = std::mem::replace(&mut self.cols, DMatrix::zeros(0, 0)).insert_column(m, 0.0);
        self.cols.set_column(m, &w);
        true
    }

    pub fn enrich_primal(&mut self, u: &DVector<f64>) -> bool {
        self.orthonormalize_append(u)
    }

    /// Appends every column of `q`; returns how many were accepted.
    pub fn enrich_dual_full(&mut self, q: &DMatrix<f64>) -> usize {
        q.column_iter()
            .filter(|c| self.orthonormalize_append(&c.into_owned()))
            .count()
    }

    pub fn enrich_dual_partial(&mut self, y: &DVector<f64>) -> bool {
        self.orthonormalize_append(y)
    }

    /// Orthogonal projection coefficients `Bᵀ G x`.
    pub fn coefficients(&self, x: &DVector<f64>) -> DVector<f64> {
        self.cols.tr_mul(&self.gram.mul_vec(x))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        mtx::write_array(path, &self.cols)
    }

    pub fn load(path: &Path, gram: Arc<CsrMatrix>, tol_rank: f64) -> Result<Self> {
        let cols = mtx::read_dense(path)?;
        Self::from_columns(gram, cols, tol_rank).map_err(|e| Error::parse(path, e.to_string()))
    }
}
