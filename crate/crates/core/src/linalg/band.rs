//! Banded Cholesky and LU factorizations for sparse matrices with a narrow
//! profile. Grid problems in natural ordering have bandwidth close to the
//! grid width, so both factorizations cost O(n·bw²).

use nalgebra::{DMatrix, DVector};

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// `A = C Cᵀ` with `C` lower triangular and lower bandwidth `kl`.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    kl: usize,
    // Row-major: row i holds columns i-kl ..= i.
    data: Vec<f64>,
}

impl BandCholesky {
    /// Factors the symmetric matrix `a`, reading its lower triangle.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let (n, m) = a.shape();
        if n != m {
            return Err(Error::Shape(format!("Cholesky of a {n}x{m} matrix")));
        }
        let (lo, up) = a.bandwidths();
        let kl = lo.max(up);
        let w = kl + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    data[i * w + j + kl - i] += v;
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(kl);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(kl));
                let mut s = data[i * w + j + kl - i];
                for k in k0..j {
                    s -= data[i * w + k + kl - i] * data[j * w + k + kl - j];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotSpd(format!(
                            "nonpositive pivot {s:.3e} at row {i}"
                        )));
                    }
                    data[i * w + kl] = s.sqrt();
                } else {
                    data[i * w + j + kl - i] = s / data[j * w + kl];
                }
            }
        }
        Ok(Self { n, kl, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.kl + 1) + j + self.kl - i]
    }

    /// Overwrites `x` with `C⁻¹ x`.
    pub fn solve_lower_in_place(&self, x: &mut [f64]) {
        for i in 0..self.n {
            let mut s = x[i];
            for k in i.saturating_sub(self.kl)..i {
                s -= self.at(i, k) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
    }

    /// Overwrites `x` with `C⁻ᵀ x`.
    pub fn solve_upper_in_place(&self, x: &mut [f64]) {
        for i in (0..self.n).rev() {
            let mut s = x[i];
            let k1 = (i + self.kl).min(self.n - 1);
            for k in i + 1..=k1 {
                s -= self.at(k, i) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
    }

    /// Overwrites `x` with `A⁻¹ x`.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        self.solve_lower_in_place(x);
        self.solve_upper_in_place(x);
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        for mut c in x.column_iter_mut() {
            self.solve_in_place(c.as_mut_slice());
        }
        x
    }

    /// `C⁻¹ B` column by column.
    pub fn whiten_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        for mut c in x.column_iter_mut() {
            self.solve_lower_in_place(c.as_mut_slice());
        }
        x
    }

    pub fn whiten(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_lower_in_place(x.as_mut_slice());
        x
    }

    /// `Cᵀ X` column by column.
    pub fn lift_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, x.ncols());
        for (c, xc) in x.column_iter().enumerate() {
            for i in 0..self.n {
                let k1 = (i + self.kl).min(self.n - 1);
                out[(i, c)] = (i..=k1).map(|k| self.at(k, i) * xc[k]).sum();
            }
        }
        out
    }

    /// Bytes held by the factor.
    pub fn memory_bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<f64>()
    }
}

/// LU with partial pivoting in LAPACK-style interleaved band storage.
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    // Row-major: row i holds columns i-kl ..= i+kl+ku.
    data: Vec<f64>,
    piv: Vec<usize>,
    min_pivot: f64,
}

impl BandLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let (n, m) = a.shape();
        if n != m {
            return Err(Error::Shape(format!("LU of a {n}x{m} matrix")));
        }
        let (kl, ku) = a.bandwidths();
        let w = 2 * kl + ku + 1;
        let off = |i: usize, j: usize| i * w + j + kl - i;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                data[off(i, j)] += v;
            }
        }
        let scale = a.max_abs();
        let tiny = scale * f64::EPSILON * (n.max(1) as f64);
        let mut piv = vec![0usize; n];
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let ilast = (k + kl).min(n - 1);
            let jlast = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = data[off(k, k)].abs();
            for i in k + 1..=ilast {
                let v = data[off(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) || !best.is_finite() {
                return Err(Error::Singular(format!(
                    "pivot {best:.3e} at column {k} (scale {scale:.3e})"
                )));
            }
            min_pivot = min_pivot.min(best);
            piv[k] = p;
            if p != k {
                for j in k..=jlast {
                    data.swap(off(k, j), off(p, j));
                }
            }
            let d = data[off(k, k)];
            for i in k + 1..=ilast {
                let l = data[off(i, k)] / d;
                data[off(i, k)] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=jlast {
                    data[off(i, j)] -= l * data[off(k, j)];
                }
            }
        }
        Ok(Self {
            n,
            kl,
            ku,
            data,
            piv,
            min_pivot,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Smallest pivot magnitude encountered.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (2 * self.kl + self.ku + 1) + j + self.kl - i]
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n.saturating_sub(1)) {
                    x[i] -= self.at(i, k) * xk;
                }
            }
        }
        let uw = self.kl + self.ku;
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + uw).min(n - 1) {
                s -= self.at(i, j) * x[j];
            }
            x[i] = s / self.at(i, i);
        }
    }

    /// Overwrites `x` with `A⁻ᵀ x`.
    pub fn solve_transpose_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        let uw = self.kl + self.ku;
        for i in 0..n {
            let mut s = x[i];
            for j in i.saturating_sub(uw)..i {
                s -= self.at(j, i) * x[j];
            }
            x[i] = s / self.at(i, i);
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for i in k + 1..=(k + self.kl).min(n.saturating_sub(1)) {
                s -= self.at(i, k) * x[i];
            }
            x[k] = s;
            x.swap(k, self.piv[k]);
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    pub fn solve_transpose(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_transpose_in_place(x.as_mut_slice());
        x
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        for mut c in x.column_iter_mut() {
            self.solve_in_place(c.as_mut_slice());
        }
        x
    }

    pub fn solve_transpose_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        for mut c in x.column_iter_mut() {
            self.solve_transpose_in_place(c.as_mut_slice());
        }
        x
    }

    pub fn memory_bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<f64>()
            + self.piv.len() * std::mem::size_of::<usize>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tridiag(n: usize, lo: f64, d: f64, up: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, d));
            if i > 0 {
                t.push((i, i - 1, lo));
            }
            if i + 1 < n {
                t.push((i, i + 1, up));
            }
        }
        CsrMatrix::from_triplets(n, n, t).unwrap()
    }

    #[test]
    fn cholesky_solves_laplacian() {
        let a = tridiag(20, -1.0, 2.0, -1.0);
        let f = BandCholesky::factor(&a).unwrap();
        let b = DVector::from_fn(20, |i, _| (i as f64).sin());
        let x = f.solve(&b);
        assert!((a.mul_vec(&x) - &b).norm() < 1e-12 * b.norm());
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = tridiag(5, 2.0, 1.0, 2.0);
        assert!(matches!(BandCholesky::factor(&a), Err(Error::NotSpd(_))));
    }

    #[test]
    fn lu_rejects_singular() {
        let a = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 4.0)])
            .unwrap();
        assert!(matches!(BandLu::factor(&a), Err(Error::Singular(_))));
    }

    fn random_banded(n: usize, kl: usize, ku: usize, vals: &[f64]) -> CsrMatrix {
        let mut t = Vec::new();
        let mut c = 0;
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                t.push((i, j, vals[c % vals.len()]));
                c += 1;
            }
        }
        CsrMatrix::from_triplets(n, n, t).unwrap()
    }

    proptest! {
        #[test]
        fn lu_matches_dense_solve(
            n in 2usize..14, kl in 0usize..4, ku in 0usize..4,
            vals in prop::collection::vec(-1.0f64..1.0, 60),
        ) {
            let a = random_banded(n, kl, ku, &vals);
            let dense = a.to_dense();
            prop_assume!(dense.clone().svd(false, false).singular_values.min() > 1e-3);
            let f = BandLu::factor(&a).unwrap();
            let b = DVector::from_fn(n, |i, _| 1.0 + i as f64);
            let x = f.solve(&b);
            prop_assert!((&dense * &x - &b).norm() < 1e-8 * b.norm() * (1.0 + x.norm()));
            let y = f.solve_transpose(&b);
            prop_assert!((dense.transpose() * &y - &b).norm() < 1e-8 * b.norm() * (1.0 + y.norm()));
        }

        #[test]
        fn cholesky_matches_dense(n in 1usize..15, kl in 0usize..4, vals in prop::collection::vec(-1.0f64..1.0, 60)) {
            let b = random_banded(n, kl, 0, &vals).to_dense();
            let spd = &b * b.transpose() + DMatrix::identity(n, n);
            let a = CsrMatrix::from_dense(&spd);
            let f = BandCholesky::factor(&a).unwrap();
            let rhs = DVector::from_fn(n, |i, _| (i as f64) - 2.0);
            let x = f.solve(&rhs);
            prop_assert!((&spd * &x - &rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
            let lifted = f.lift_mat(&DMatrix::from_column_slice(n, 1, rhs.as_slice()));
            prop_assert!((lifted.norm_squared() - rhs.dot(&(&spd * &rhs))).abs() < 1e-9 * (1.0 + rhs.norm_squared()));
            let w = f.whiten(&rhs);
            let direct = rhs.dot(&spd.clone().cholesky().unwrap().solve(&rhs));
            prop_assert!((w.norm_squared() - direct).abs() < 1e-10 * (1.0 + direct));
        }
    }
}
