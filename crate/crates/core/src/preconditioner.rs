//! Interpolation of the inverse operator, `P_m(ξ) = Σ_i λ_i(ξ) A(ξ_i)⁻¹`.
//!
//! The coefficients minimise the sketched residual `‖Σ_i λ_i P_i A(ξ) Ω − Ω‖_F`
//! for a seeded Gaussian `n × s` matrix `Ω`. The vectorised blocks
//! `P_i A_a Ω` are stored through an incremental QR factorization, so the
//! online least-squares problem only involves the (small) R factor.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dense::lstsq;
use crate::model::{num17, FullOrderModel, OperatorFactor};

pub const DEFAULT_SKETCH_SIZE: usize = 400;
pub const DEFAULT_SKETCH_SEED: u64 = 13;
/// Componentwise distance under which two interpolation points are the same.
pub const DUPLICATE_TOL: f64 = 1e-12;
const NNLS_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecondConfig {
    pub sketch_size: usize,
    pub seed: u64,
    pub positivity: bool,
}

impl Default for PrecondConfig {
    fn default() -> Self {
        Self { sketch_size: DEFAULT_SKETCH_SIZE, seed: DEFAULT_SKETCH_SEED, positivity: false }
    }
}

/// Persistent description; factorizations are recomputed on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecondMeta {
    pub config: PrecondConfig,
    #[serde(with = "num17::vecvec")]
    pub points: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct InverseInterpolant {
    config: PrecondConfig,
    n: usize,
    terms: usize,
    omega: DMatrix<f64>,
    points: Vec<Vec<f64>>,
    factors: Vec<OperatorFactor>,
    // Orthonormal basis of the stacked vectorised blocks and the R columns;
    // column 0 is vec(Ω), then `terms` columns per point.
    q: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl InverseInterpolant {
    pub fn new(model: &FullOrderModel, config: PrecondConfig) -> Result<Self> {
        if config.sketch_size == 0 {
            return Err(Error::Config("sketch size must be positive".into()));
        }
        let n = model.n();
        let s = config.sketch_size.min(n);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let omega = DMatrix::from_fn(n, s, |_, _| StandardNormal.sample(&mut rng));
        let mut out = Self {
            config,
            n,
            terms: model.a_form().len(),
            omega,
            points: Vec::new(),
            factors: Vec::new(),
            q: Vec::new(),
            r: Vec::new(),
        };
        let w = out.omega.as_slice().to_vec();
        out.push_column(w);
        Ok(out)
    }

    pub fn from_meta(model: &FullOrderModel, meta: &PrecondMeta) -> Result<Self> {
        let mut p = Self::new(model, meta.config.clone())?;
        for xi in &meta.points {
            p.add_point(model, xi)?;
        }
        Ok(p)
    }

    pub fn meta(&self) -> PrecondMeta {
        PrecondMeta { config: self.config.clone(), points: self.points.clone() }
    }

    pub fn config(&self) -> &PrecondConfig {
        &self.config
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn sketch(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn sketch_size(&self) -> usize {
        self.omega.ncols()
    }

    /// Bytes held by factorizations, the sketch and the stored blocks.
    pub fn memory_bytes(&self) -> usize {
        let f: usize = self.factors.iter().map(OperatorFactor::memory_bytes).sum();
        let q: usize = self.q.iter().map(|v| v.len() * 8).sum();
        let r: usize = self.r.iter().map(|v| v.len() * 8).sum();
        f + q + r + self.omega.len() * 8
    }

    fn push_column(&mut self, mut w: Vec<f64>) {
        let norm0 = dot(&w, &w).sqrt();
        let mut coef = vec![0.0; self.q.len()];
        for _ in 0..2 {
            for (k, qk) in self.q.iter().enumerate() {
                let c = dot(qk, &w);
                coef[k] += c;
                w.iter_mut().zip(qk).for_each(|(x, q)| *x -= c * q);
            }
        }
        let norm = dot(&w, &w).sqrt();
        if norm > 1e-14 * norm0 && norm > 0.0 {
            w.iter_mut().for_each(|x| *x /= norm);
            self.q.push(w);
            coef.push(norm);
        }
        self.r.push(coef);
    }

    /// Adds `ξ` as an interpolation point; duplicates are rejected.
    pub fn add_point(&mut self, model: &FullOrderModel, xi: &[f64]) -> Result<()> {
        self.check_new_point(model, xi)?;
        let factor = model.factor_a(xi)?;
        self.add_factored_point(model, xi, factor)
    }

    /// Whether `ξ` is (up to `DUPLICATE_TOL`) an interpolation point already.
    pub fn contains_point(&self, xi: &[f64]) -> bool {
        self.points
            .iter()
            .any(|p| p.iter().zip(xi).all(|(a, b)| (a - b).abs() <= DUPLICATE_TOL * a.abs().max(1.0)))
    }

    fn check_new_point(&self, model: &FullOrderModel, xi: &[f64]) -> Result<()> {
        if model.n() != self.n || model.a_form().len() != self.terms {
            return Err(Error::Shape("preconditioner built for another model".into()));
        }
        if self.contains_point(xi) {
            return Err(Error::Config(format!("duplicate interpolation point {xi:?}")));
        }
        Ok(())
    }

    /// As `add_point`, reusing a factorization of `A(ξ)`.
    pub fn add_factored_point(&mut self, model: &FullOrderModel, xi: &[f64], factor: OperatorFactor) -> Result<()> {
        self.check_new_point(model, xi)?;
        for t in model.a_form().terms() {
            let block = factor.solve_mat(&t.value.mul_dense(&self.omega));
            self.push_column(block.as_slice().to_vec());
        }
        self.points.push(xi.to_vec());
        self.factors.push(factor);
        Ok(())
    }

    fn r_dense(&self, col: usize) -> DVector<f64> {
        let mut v = DVector::zeros(self.q.len());
        for (i, x) in self.r[col].iter().enumerate() {
            v[i] = *x;
        }
        v
    }

    /// Coefficients `λ(ξ)` and the sketched residual they attain.
    pub fn coefficients(&self, model: &FullOrderModel, xi: &[f64]) -> Result<(DVector<f64>, f64)> {
        model.check_param(xi)?;
        let m = self.m();
        let f = self.r_dense(0);
        if m == 0 {
            return Ok((DVector::zeros(0), f.norm()));
        }
        let theta = model.a_form().coefficients(xi);
        let mut e = DMatrix::zeros(self.q.len(), m);
        for i in 0..m {
            for (a, th) in theta.iter().enumerate() {
                let col = self.r_dense(1 + i * self.terms + a);
                e.column_mut(i).axpy(*th, &col, 1.0);
            }
        }
        let lambda = if self.config.positivity {
            nnls(&e, &f)
        } else {
            let fm = DMatrix::from_column_slice(f.len(), 1, f.as_slice());
            lstsq(&e, &fm, 1e-14).column(0).into_owned()
        };
        let res = (&e * &lambda - &f).norm();
        Ok((lambda, res))
    }

    /// Sketched residual `‖P_m(ξ) A(ξ) Ω − Ω‖_F`; for `m = 0` uses `P_0 = R_V0⁻¹`.
    pub fn residual(&self, model: &FullOrderModel, xi: &[f64]) -> Result<f64> {
        if self.m() > 0 {
            return Ok(self.coefficients(model, xi)?.1);
        }
        let a = model.assemble_a(xi)?;
        let pa = model.v0().apply_inverse_mat(&a.mul_dense(&self.omega));
        Ok((pa - &self.omega).norm())
    }

    fn combine(&self, lambda: &DVector<f64>, x: &DMatrix<f64>, adjoint: bool) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (i, f) in self.factors.iter().enumerate() {
            if lambda[i] == 0.0 {
                continue;
            }
            let y = if adjoint { f.solve_transpose_mat(x) } else { f.solve_mat(x) };
            out += y * lambda[i];
        }
        out
    }

    /// `P_m(ξ) X`.
    pub fn apply(&self, model: &FullOrderModel, xi: &[f64], x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if self.m() == 0 {
            model.check_param(xi)?;
            return Ok(model.v0().apply_inverse_mat(x));
        }
        let (lambda, _) = self.coefficients(model, xi)?;
        Ok(self.combine(&lambda, x, false))
    }

    /// `P_m(ξ)ᵀ X`.
    pub fn apply_adjoint(&self, model: &FullOrderModel, xi: &[f64], x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if self.m() == 0 {
            model.check_param(xi)?;
            return Ok(model.v0().apply_inverse_mat(x));
        }
        let (lambda, _) = self.coefficients(model, xi)?;
        Ok(self.combine(&lambda, x, true))
    }

    /// Preconditioned test space `W_r(ξ) = P_m(ξ)ᵀ R_V0 V`; equals `V` for `m = 0`.
    pub fn test_space(&self, model: &FullOrderModel, xi: &[f64], v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.apply_adjoint(model, xi, &model.r_v0().mul_dense(v))
    }

    /// `A(ξ_i)⁻ᵀ R_V0 V` for every interpolation point.
    pub fn test_vectors(&self, model: &FullOrderModel, v: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let rv = model.r_v0().mul_dense(v);
        self.factors.iter().map(|f| f.solve_transpose_mat(&rv)).collect()
    }

    /// Greedily adds `count` points from `candidates`, each time the one with
    /// the largest sketched residual. Returns the selected candidate indices.
    pub fn greedy_select(
        &mut self,
        model: &FullOrderModel,
        candidates: &[Vec<f64>],
        count: usize,
    ) -> Result<Vec<usize>> {
        let mut picked = Vec::new();
        for _ in 0..count {
            let mut best: Option<(usize, f64)> = None;
            for (j, xi) in candidates.iter().enumerate() {
                if picked.contains(&j) {
                    continue;
                }
                let r = self.residual(model, xi)?;
                if best.is_none_or(|(_, b)| r > b) {
                    best = Some((j, r));
                }
            }
            let Some((j, _)) = best else { break };
            self.add_point(model, &candidates[j])?;
            picked.push(j);
        }
        Ok(picked)
    }
}

/// Lawson–Hanson active-set solution of `min ‖E λ − f‖` subject to `λ ≥ 0`.
pub fn nnls(e: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let m = e.ncols();
    let mut x = DVector::zeros(m);
    let mut passive = vec![false; m];
    let scale = e.norm() * f.norm() + f64::MIN_POSITIVE;
    let sub_solve = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..m).filter(|&i| passive[i]).collect();
        let sub = DMatrix::from_fn(e.nrows(), idx.len(), |r, c| e[(r, idx[c])]);
        let fm = DMatrix::from_column_slice(f.len(), 1, f.as_slice());
        let z = lstsq(&sub, &fm, 1e-14);
        let mut full = DVector::zeros(m);
        for (c, &i) in idx.iter().enumerate() {
            full[i] = z[(c, 0)];
        }
        full
    };
    for _ in 0..(3 * m + 10) {
        let w = e.transpose() * (f - e * &x);
        let cand = (0..m)
            .filter(|&i| !passive[i] && w[i] > NNLS_TOL * scale)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(t) = cand else { break };
        passive[t] = true;
        loop {
            let z = sub_solve(&passive);
            if (0..m).all(|i| !passive[i] || z[i] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for i in 0..m {
                if passive[i] && z[i] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - z[i]));
                }
            }
            x += (z - &x) * alpha;
            for i in 0..m {
                if passive[i] && x[i].abs() <= 1e-15 {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    x
}
