use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from (row, col, value) triplets. Duplicates are summed.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(i, j, _) in &entries {
            if i >= nrows || j >= ncols {
                return Err(Error::Shape(format!(
                    "entry ({i}, {j}) outside a {nrows}x{ncols} matrix"
                )));
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            indices.push(j);
            values.push(v);
            indptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Keeps every nonzero entry of a dense matrix.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let trips = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                let v = m[(i, j)];
                (v != 0.0).then_some((i, j, v))
            });
        Self::from_triplets(m.nrows(), m.ncols(), trips).expect("indices are in range")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    /// Column indices and values stored in row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols, "mul_vec dimension");
        DVector::from_fn(self.nrows, |i, _| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
        })
    }

    /// Computes `selfᵀ x`.
    pub fn tr_mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.nrows, "tr_mul_vec dimension");
        let mut out = DVector::zeros(self.ncols);
        for i in 0..self.nrows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[j] += v * xi;
            }
        }
        out
    }

    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.ncols, "mul_dense dimension");
        let mut out = DMatrix::zeros(self.nrows, x.ncols());
        for c in 0..x.ncols() {
            let xc = x.column(c);
            let xs = xc.as_slice();
            let mut oc = out.column_mut(c);
            for i in 0..self.nrows {
                let (cols, vals) = self.row(i);
                oc[i] = cols.iter().zip(vals).map(|(&j, &v)| v * xs[j]).sum();
            }
        }
        out
    }

    /// Computes `selfᵀ X`.
    pub fn tr_mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.nrows, "tr_mul_dense dimension");
        let mut out = DMatrix::zeros(self.ncols, x.ncols());
        for c in 0..x.ncols() {
            let xc = x.column(c);
            let mut oc = out.column_mut(c);
            for i in 0..self.nrows {
                let xi = xc[i];
                if xi == 0.0 {
                    continue;
                }
                let (cols, vals) = self.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    oc[j] += v * xi;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> CsrMatrix {
        let trips = self.triplets().map(|(i, j, v)| (j, i, v));
        CsrMatrix::from_triplets(self.ncols, self.nrows, trips).expect("indices are in range")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn scale(&self, c: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Forms `Σ c_k M_k` over the union of the sparsity patterns.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> Result<CsrMatrix> {
        let Some(&(_, first)) = terms.first() else {
            return Err(Error::Shape("linear combination of zero matrices".into()));
        };
        let (nrows, ncols) = first.shape();
        if terms.iter().any(|(_, m)| m.shape() != (nrows, ncols)) {
            return Err(Error::Shape("linear combination of mismatched shapes".into()));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0f64; ncols];
        let mut mark = vec![usize::MAX; ncols];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..nrows {
            touched.clear();
            for &(c, m) in terms {
                let (cols, vals) = m.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += c * v;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                indices.push(j);
                values.push(acc[j]);
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        })
    }

    /// Lower and upper bandwidths of the stored pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for (i, j, _) in self.triplets() {
            if j < i {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        (kl, ku)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `‖M − Mᵀ‖_F / ‖M‖_F`, zero for the zero matrix.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let diff = CsrMatrix::linear_combination(&[(1.0, self), (-1.0, &self.transpose())])
            .expect("square shapes agree");
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            0.0
        } else {
            diff.frobenius_norm() / norm
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        CsrMatrix::from_triplets(
            3,
            4,
            vec![(0, 0, 1.0), (2, 3, -2.0), (1, 1, 3.0), (0, 0, 0.5), (2, 0, 4.0)],
        )
        .unwrap()
    }

    #[test]
    fn duplicates_are_summed() {
        let m = sample();
        assert_eq!(m.get(0, 0), 1.5);
        assert_eq!(m.nnz(), 4);
    }

    #[test]
    fn products_match_dense() {
        let m = sample();
        let d = m.to_dense();
        let x = DVector::from_vec(vec![1.0, -1.0, 2.0, 0.5]);
        assert!((m.mul_vec(&x) - &d * &x).norm() < 1e-14);
        let y = DVector::from_vec(vec![0.3, 2.0, -1.0]);
        assert!((m.tr_mul_vec(&y) - d.transpose() * &y).norm() < 1e-14);
        let xm = DMatrix::from_fn(4, 2, |i, j| (i + 2 * j) as f64 - 1.5);
        assert!((m.mul_dense(&xm) - &d * &xm).norm() < 1e-14);
        let ym = DMatrix::from_fn(3, 2, |i, j| (i * j) as f64 + 0.25);
        assert!((m.tr_mul_dense(&ym) - d.transpose() * &ym).norm() < 1e-14);
        assert_eq!(m.transpose().to_dense(), d.transpose());
    }

    #[test]
    fn linear_combination_unions_patterns() {
        let a = CsrMatrix::identity(3);
        let b = CsrMatrix::from_triplets(3, 3, vec![(0, 2, 1.0), (1, 1, 2.0)]).unwrap();
        let c = CsrMatrix::linear_combination(&[(2.0, &a), (-1.0, &b)]).unwrap();
        let expect = a.to_dense() * 2.0 - b.to_dense();
        assert_eq!(c.to_dense(), expect);
        assert_eq!(c.bandwidths(), (0, 2));
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(CsrMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn asymmetry_of_symmetric_matrix_is_zero() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 3.0), (1, 0, 3.0), (0, 0, 1.0)]).unwrap();
        assert_eq!(m.asymmetry(), 0.0);
    }
}
