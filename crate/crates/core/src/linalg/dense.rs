use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Reduced systems beyond this condition estimate are treated as inf-sup failures.
pub const CONDITION_LIMIT: f64 = 1e14;

/// Dense LU with partial pivoting, column-major, supporting transposed solves.
#[derive(Clone, Debug)]
pub struct DenseLu {
    lu: DMatrix<f64>,
    piv: Vec<usize>,
    norm1: f64,
    singular: bool,
}

impl DenseLu {
    pub fn new(a: &DMatrix<f64>) -> Self {
        assert!(a.is_square(), "DenseLu needs a square matrix");
        let n = a.nrows();
        let norm1 = (0..n)
            .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut lu = a.clone();
        let mut piv = vec![0; n];
        let mut singular = false;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if best == 0.0 || !best.is_finite() {
                singular = true;
                continue;
            }
            if p != k {
                lu.swap_rows(k, p);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                lu[(i, k)] /= d;
            }
            let data = lu.as_mut_slice();
            for j in k + 1..n {
                let (left, right) = data.split_at_mut(j * n);
                let lcol = &left[k * n..(k + 1) * n];
                let rcol = &mut right[..n];
                let ukj = rcol[k];
                if ukj == 0.0 {
                    continue;
                }
                for i in k + 1..n {
                    rcol[i] -= lcol[i] * ukj;
                }
            }
        }
        Self {
            lu,
            piv,
            norm1,
            singular,
        }
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    fn solve_vec_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                let col = self.lu.column(j);
                for i in j + 1..n {
                    x[i] -= col[i] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.lu[(j, j)];
            let xj = x[j];
            if xj != 0.0 {
                let col = self.lu.column(j);
                for i in 0..j {
                    x[i] -= col[i] * xj;
                }
            }
        }
    }

    fn solve_transpose_vec_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        for j in 0..n {
            let col = self.lu.column(j);
            let mut s = x[j];
            for i in 0..j {
                s -= col[i] * x[i];
            }
            x[j] = s / col[j];
        }
        for j in (0..n).rev() {
            let col = self.lu.column(j);
            let mut s = x[j];
            for i in j + 1..n {
                s -= col[i] * x[i];
            }
            x[j] = s;
        }
        for k in (0..n).rev() {
            x.swap(k, self.piv[k]);
        }
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        for mut c in x.column_iter_mut() {
            self.solve_vec_in_place(c.as_mut_slice());
        }
        x
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_vec_in_place(x.as_mut_slice());
        x
    }

    /// 1-norm condition estimate (Hager's method); infinite when singular.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 1.0;
        }
        if self.singular {
            return f64::INFINITY;
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for _ in 0..5 {
            let mut y = x.clone();
            self.solve_vec_in_place(&mut y);
            est = y.iter().map(|v| v.abs()).sum::<f64>();
            let mut z: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            self.solve_transpose_vec_in_place(&mut z);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |acc, (j, v)| if v.abs() > acc.1 { (j, v.abs()) } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx {
                break;
            }
            x.iter_mut().for_each(|v| *v = 0.0);
            x[jmax] = 1.0;
        }
        let c = est * self.norm1;
        if c.is_finite() {
            c
        } else {
            f64::INFINITY
        }
    }
}

/// Solves `A X = B`, failing when the condition estimate exceeds [`CONDITION_LIMIT`].
pub fn solve_checked(a: &DMatrix<f64>, b: &DMatrix<f64>, stage: &str) -> Result<DMatrix<f64>> {
    if a.nrows() != b.nrows() || !a.is_square() {
        return Err(Error::Shape(format!(
            "{stage}: system {}x{} with right-hand side {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Ok(DMatrix::zeros(0, b.ncols()));
    }
    let lu = DenseLu::new(a);
    let cond = lu.condition_estimate();
    if !(cond <= CONDITION_LIMIT) {
        return Err(Error::InfSup {
            stage: stage.to_string(),
            cond,
        });
    }
    Ok(lu.solve(b))
}

pub fn solve_checked_vec(a: &DMatrix<f64>, b: &DVector<f64>, stage: &str) -> Result<DVector<f64>> {
    let bm = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let x = solve_checked(a, &bm, stage)?;
    Ok(DVector::from_column_slice(x.as_slice()))
}

/// Orthonormal basis of the range of `m`, dropping singular values below `rel_tol·σ_max`.
pub fn orth_range(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DMatrix::zeros(n, 0);
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > rel_tol * smax)
        .collect();
    DMatrix::from_fn(n, keep.len(), |i, j| u[(i, keep[j])])
}

/// Largest singular value; zero for empty matrices.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Smallest singular value of a matrix with at least as many rows as columns.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 {
        return f64::INFINITY;
    }
    if m.nrows() < m.ncols() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.min()
}

/// Removes from `b` its component in the column space of `q` (orthonormal columns), twice.
pub fn project_out(q: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    if q.ncols() == 0 {
        return b.clone();
    }
    let mut r = b - q * (q.transpose() * b);
    r -= q * (q.transpose() * &r);
    r
}

/// Minimum-norm least-squares solution of `min ‖G c − h‖` via SVD.
pub fn lstsq(g: &DMatrix<f64>, h: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if g.ncols() == 0 || g.nrows() == 0 {
        return DMatrix::zeros(g.ncols(), h.ncols());
    }
    let svd = g.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested");
    let vt = svd.v_t.as_ref().expect("requested");
    let smax = svd.singular_values.max();
    let mut out = DMatrix::zeros(g.ncols(), h.ncols());
    if smax == 0.0 {
        return out;
    }
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= rel_tol * smax {
            continue;
        }
        let coef = u.column(i).transpose() * h / s;
        out += vt.row(i).transpose() * coef;
    }
    out
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues in ascending order.
pub fn sym_eig_sorted(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let vecs = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Clips eigenvalues in `[-1e-12, 0)` to zero; more negative values are returned as is.
pub fn clip_small_negative(v: f64) -> f64 {
    if (-1e-12..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

/// Unit top eigenvector of a symmetric matrix, made unique within near-degenerate
/// top eigenspaces: the first coordinate vector with a nonzero projection is
/// projected onto the eigenspace, and its first significant entry is made positive.
pub fn top_eigenvector(m: &DMatrix<f64>, rel_gap: f64) -> (f64, DVector<f64>) {
    let n = m.nrows();
    let (vals, vecs) = sym_eig_sorted(m);
    let top = vals[n - 1];
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let cluster: Vec<usize> = (0..n).filter(|&i| top - vals[i] <= rel_gap * scale).collect();
    let basis = DMatrix::from_fn(n, cluster.len(), |i, j| vecs[(i, cluster[j])]);
    let mut pick = basis.column(cluster.len() - 1).into_owned();
    for e in 0..n {
        let proj = &basis * basis.row(e).transpose();
        if proj.norm() > 1e-8 {
            pick = proj;
            break;
        }
    }
    pick /= pick.norm();
    let pmax = pick.amax();
    if let Some(first) = pick.iter().copied().find(|v| v.abs() > 1e-10 * pmax) {
        if first < 0.0 {
            pick = -pick;
        }
    }
    (top, pick)
}

/// `Rᵀ` for a dense lower Cholesky factor of an SPD matrix: returns `C` with `M = C Cᵀ`.
pub fn cholesky_lower(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    sym.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::NotSpd(what.to_string()))
}
