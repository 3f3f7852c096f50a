//! Offline/online split of the reduced solves.
//!
//! All reduced quantities live on one combined coordinate set
//! `X = [V | W | T | Y_1 … Y_m]` where `T` (energy norm only) is an
//! `R_V0`-orthonormal basis of `V + W` and `Y_i = A(ξ_i)⁻ᵀ R_V0 V` are the
//! preconditioned test vectors. Per affine term the cache stores `Xᵀ A_a X`,
//! `Xᵀ b_β` and `L_γ X`.
//!
//! Dual norms are never formed from Gram matrices. Instead the generators
//! `{b_β, L_γᵀ, A_a X}` are whitened with the Cholesky factor of `R_V0` and
//! compressed by a QR factorization; a residual norm is then the Euclidean
//! norm of a small combination of the R columns. For the reference norm a
//! second family `{L_γᵀ, A_aᵀ X}` provides the supremizer blocks.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{Method, COST_CONSTANT};
use crate::error::{Error, Result};
use crate::linalg::dense::{lstsq, solve_checked, solve_checked_vec, spectral_norm};
use crate::model::{FullOrderModel, NormKind, OperatorFactor, RieszMap};
use crate::preconditioner::InverseInterpolant;
use crate::spaces::Basis;

/// Relative singular value threshold used to deflate dependent test directions.
const DEFLATION_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
struct Family {
    b: Vec<DVector<f64>>,
    l: Vec<DMatrix<f64>>,
    a: Vec<DMatrix<f64>>,
}

#[derive(Clone, Debug)]
struct Cache {
    x: DMatrix<f64>,
    v: Range<usize>,
    w: Range<usize>,
    t: Range<usize>,
    y: Vec<Range<usize>>,
    ax: Vec<DMatrix<f64>>,
    xb: Vec<DVector<f64>>,
    lx: Vec<DMatrix<f64>>,
    res: Family,
    sup: Option<Family>,
}

/// Whitened generators compressed to at most `n` rows, split back into pieces.
fn compress(v0: &RieszMap, pieces: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let n = v0.matrix().nrows();
    let total: usize = pieces.iter().map(|p| p.ncols()).sum();
    let mut g = DMatrix::zeros(n, total);
    let mut c = 0;
    for p in pieces {
        g.view_mut((0, c), (n, p.ncols())).copy_from(p);
        c += p.ncols();
    }
    let g = v0.whiten_mat(&g);
    let r = if total < n && total > 0 { g.qr().r() } else { g };
    let mut out = Vec::with_capacity(pieces.len());
    let mut c = 0;
    for p in pieces {
        out.push(r.columns(c, p.ncols()).into_owned());
        c += p.ncols();
    }
    out
}

fn hcat(parts: &[&DMatrix<f64>], n: usize) -> DMatrix<f64> {
    let total: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut x = DMatrix::zeros(n, total);
    let mut c = 0;
    for p in parts {
        x.view_mut((0, c), (n, p.ncols())).copy_from(p);
        c += p.ncols();
    }
    x
}

impl Cache {
    fn build(model: &FullOrderModel, primal: &Basis, dual: &Basis, precond: Option<&InverseInterpolant>) -> Self {
        let n = model.n();
        let energy = model.norm_kind() == NormKind::Energy;
        let t = if energy {
            let mut tb = Basis::new(model.v0().matrix_arc(), primal.tol_rank());
            for c in primal.matrix().column_iter().chain(dual.matrix().column_iter()) {
                tb.orthonormalize_append(&c.into_owned());
            }
            tb.matrix().clone()
        } else {
            DMatrix::zeros(n, 0)
        };
        let ys = precond
            .filter(|p| p.m() > 0)
            .map(|p| p.test_vectors(model, primal.matrix()))
            .unwrap_or_default();
        let mut parts: Vec<&DMatrix<f64>> = vec![primal.matrix(), dual.matrix(), &t];
        parts.extend(ys.iter());
        let x = hcat(&parts, n);
        let (r, k, p) = (primal.dim(), dual.dim(), t.ncols());
        let v = 0..r;
        let w = r..r + k;
        let tr = r + k..r + k + p;
        let y = (0..ys.len()).map(|i| r + k + p + i * r..r + k + p + (i + 1) * r).collect();
        let a_x: Vec<DMatrix<f64>> = model.a_form().values().map(|a| a.mul_dense(&x)).collect();
        let ax = a_x.iter().map(|ax| x.transpose() * ax).collect();
        let xb = model.b_form().values().map(|b| x.tr_mul(b)).collect();
        let lx = model.l_form().values().map(|l| l.mul_dense(&x)).collect();
        let bs: Vec<DMatrix<f64>> = model
            .b_form()
            .values()
            .map(|b| DMatrix::from_column_slice(n, 1, b.as_slice()))
            .collect();
        let lts: Vec<DMatrix<f64>> = model.l_form().values().map(|l| l.transpose().to_dense()).collect();
        let (nb, nl) = (bs.len(), lts.len());
        let mut pieces = bs;
        pieces.extend(lts.iter().cloned());
        pieces.extend(a_x);
        let mut comp = compress(model.v0(), &pieces).into_iter();
        let res = Family {
            b: comp.by_ref().take(nb).map(|m| m.column(0).into_owned()).collect(),
            l: comp.by_ref().take(nl).collect(),
            a: comp.collect(),
        };
        let sup = (!energy).then(|| {
            let mut pieces = lts;
            pieces.extend(model.a_form().values().map(|a| a.tr_mul_dense(&x)));
            let mut comp = compress(model.v0(), &pieces).into_iter();
            Family {
                b: Vec::new(),
                l: comp.by_ref().take(nl).collect(),
                a: comp.collect(),
            }
        });
        Cache { x, v, w, t: tr, y, ax, xb, lx, res, sup }
    }

    fn nx(&self) -> usize {
        self.x.ncols()
    }
}

/// Affine blocks evaluated at one parameter value.
struct Frozen {
    theta: Vec<f64>,
    psi: Vec<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    l: DMatrix<f64>,
}

fn comb(blocks: &[DMatrix<f64>], coef: &[f64], cols: Range<usize>) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let mut out = DMatrix::zeros(rows, cols.len());
    for (blk, c) in blocks.iter().zip(coef) {
        if *c != 0.0 {
            out.zip_apply(&blk.columns(cols.start, cols.len()), |o, x| *o += c * x);
        }
    }
    out
}

fn submatrix(m: &DMatrix<f64>, rows: &Range<usize>, cols: &Range<usize>) -> DMatrix<f64> {
    m.view((rows.start, cols.start), (rows.len(), cols.len())).into_owned()
}

fn subvec(v: &DVector<f64>, rows: &Range<usize>) -> DVector<f64> {
    v.rows(rows.start, rows.len()).into_owned()
}

/// Result of an online solve.
#[derive(Clone, Debug)]
pub struct OnlineSolution {
    pub method: Method,
    pub s: DVector<f64>,
    /// Primal coefficients on `V` (empty for the dual-only and energy saddle solves).
    pub u: DVector<f64>,
    /// Correction coefficients: on `W` for primal-dual, on the test space for saddle.
    pub y: DVector<f64>,
    /// Size of the reduced system(s) and the modelled cost `C · size³`.
    pub system_size: usize,
    pub online_cost: f64,
    approx_x: DVector<f64>,
    riesz_x: Option<DVector<f64>>,
}

/// Reduced model: bases, optional preconditioner and the affine cache.
#[derive(Clone, Debug)]
pub struct ReducedModel {
    model: Arc<FullOrderModel>,
    primal: Basis,
    dual: Basis,
    precond: Option<InverseInterpolant>,
    cache: Cache,
    stale: bool,
}

impl ReducedModel {
    pub fn new(
        model: Arc<FullOrderModel>,
        primal: Basis,
        dual: Basis,
        precond: Option<InverseInterpolant>,
    ) -> Result<Self> {
        let n = model.n();
        if primal.n() != n || dual.n() != n {
            return Err(Error::Shape(format!(
                "bases have {} and {} rows, model has n = {n}",
                primal.n(),
                dual.n()
            )));
        }
        let cache = Cache::build(&model, &primal, &dual, precond.as_ref());
        Ok(Self { model, primal, dual, precond, cache, stale: false })
    }

    /// Reduced model with empty bases.
    pub fn empty(model: Arc<FullOrderModel>, tol_rank: f64, precond: Option<InverseInterpolant>) -> Result<Self> {
        let g = model.v0().matrix_arc();
        Self::new(model, Basis::new(g.clone(), tol_rank), Basis::new(g, tol_rank), precond)
    }

    fn rebuild(&mut self) {
        self.cache = Cache::build(&self.model, &self.primal, &self.dual, self.precond.as_ref());
        self.stale = false;
    }

    /// Appends a primal snapshot and refreshes the cache.
    pub fn enrich_primal(&mut self, u: &DVector<f64>) -> bool {
        let ok = self.primal.enrich_primal(u);
        if ok {
            self.rebuild();
        }
        ok
    }

    /// Appends dual snapshots and refreshes the cache; returns the number accepted.
    pub fn enrich_dual(&mut self, q: &DMatrix<f64>) -> usize {
        let k = self.dual.enrich_dual_full(q);
        if k > 0 {
            self.rebuild();
        }
        k
    }

    /// Applies both enrichments with a single cache refresh.
    pub fn enrich(&mut self, u: Option<&DVector<f64>>, q: Option<&DMatrix<f64>>) -> (bool, usize) {
        let pu = u.is_some_and(|u| self.primal.enrich_primal(u));
        let kq = q.map_or(0, |q| self.dual.enrich_dual_full(q));
        if pu || kq > 0 || self.stale {
            self.rebuild();
        }
        (pu, kq)
    }

    pub fn set_preconditioner(&mut self, precond: Option<InverseInterpolant>) {
        self.precond = precond;
        self.rebuild();
    }

    pub fn model(&self) -> &FullOrderModel {
        &self.model
    }

    pub fn model_arc(&self) -> Arc<FullOrderModel> {
        self.model.clone()
    }

    pub fn primal(&self) -> &Basis {
        &self.primal
    }

    pub fn dual(&self) -> &Basis {
        &self.dual
    }

    pub fn preconditioner(&self) -> Option<&InverseInterpolant> {
        self.precond.as_ref()
    }

    /// Adds an interpolation point to the preconditioner, if there is one and
    /// `ξ` is new. The cache is refreshed by the next `enrich` call.
    pub fn add_preconditioner_point(&mut self, xi: &[f64], factor: OperatorFactor) -> Result<bool> {
        match self.precond.as_mut() {
            Some(p) if !p.contains_point(xi) => {
                p.add_factored_point(&self.model, xi, factor)?;
                self.stale = true;
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    pub fn r(&self) -> usize {
        self.primal.dim()
    }

    pub fn k(&self) -> usize {
        self.dual.dim()
    }

    /// Dimension of the saddle test space.
    pub fn p(&self) -> usize {
        match self.model.norm_kind() {
            NormKind::Energy => self.cache.t.len(),
            NormKind::Reference => self.r() + self.k(),
        }
    }

    fn energy(&self) -> bool {
        self.model.norm_kind() == NormKind::Energy
    }

    fn freeze(&self, xi: &[f64]) -> Result<Frozen> {
        self.model.check_param(xi)?;
        let m = &self.model;
        let theta = m.a_form().coefficients(xi);
        let phi = m.b_form().coefficients(xi);
        let psi = m.l_form().coefficients(xi);
        let c = &self.cache;
        let nx = c.nx();
        let mut a = DMatrix::zeros(nx, nx);
        for (blk, t) in c.ax.iter().zip(&theta) {
            a.zip_apply(blk, |o, x| *o += t * x);
        }
        let mut b = DVector::zeros(nx);
        for (blk, f) in c.xb.iter().zip(&phi) {
            b.axpy(*f, blk, 1.0);
        }
        let mut l = DMatrix::zeros(m.l(), nx);
        for (blk, p) in c.lx.iter().zip(&psi) {
            l.zip_apply(blk, |o, x| *o += p * x);
        }
        Ok(Frozen { theta, psi, a, b, l })
    }

    /// Coordinates of the primal test space `W_r(ξ)` in `X`.
    fn test_coefficients(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        let (nx, r) = (self.cache.nx(), self.r());
        let mut cw = DMatrix::zeros(nx, r);
        match self.precond.as_ref().filter(|p| p.m() > 0) {
            Some(p) => {
                let (lambda, _) = p.coefficients(&self.model, xi)?;
                for (i, range) in self.cache.y.iter().enumerate() {
                    for j in 0..r {
                        cw[(range.start + j, j)] = lambda[i];
                    }
                }
            }
            None => {
                for j in 0..r {
                    cw[(self.cache.v.start + j, j)] = 1.0;
                }
            }
        }
        Ok(cw)
    }

    fn primal_coefficients(&self, xi: &[f64], fz: &Frozen) -> Result<DVector<f64>> {
        let c = &self.cache;
        let cw = self.test_coefficients(xi)?;
        let ar = cw.transpose() * fz.a.columns(c.v.start, c.v.len());
        let rhs = cw.transpose() * &fz.b;
        solve_checked_vec(&ar, &rhs, "Petrov-Galerkin system")
    }

    fn embed(&self, range: &Range<usize>, coef: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.cache.nx());
        out.rows_mut(range.start, range.len()).copy_from(coef);
        out
    }

    pub fn solve(&self, xi: &[f64], method: Method) -> Result<OnlineSolution> {
        let fz = self.freeze(xi)?;
        let c = &self.cache;
        let (r, k) = (self.r(), self.k());
        let cube = |s: usize| COST_CONSTANT * (s as f64).powi(3);
        match method {
            Method::Primal => {
                let u = self.primal_coefficients(xi, &fz)?;
                let s = fz.l.columns(c.v.start, r) * &u;
                Ok(OnlineSolution {
                    method,
                    s,
                    approx_x: self.embed(&c.v, &u),
                    u,
                    y: DVector::zeros(0),
                    system_size: r,
                    online_cost: cube(r),
                    riesz_x: None,
                })
            }
            Method::Dual | Method::PrimalDual => {
                let u = if method == Method::PrimalDual {
                    self.primal_coefficients(xi, &fz)?
                } else {
                    DVector::zeros(0)
                };
                let ux = if method == Method::PrimalDual { self.embed(&c.v, &u) } else { DVector::zeros(c.nx()) };
                let g = subvec(&fz.b, &c.w) - fz.a.rows(c.w.start, k) * &ux;
                let mut s = &fz.l * &ux;
                let y = if self.energy() {
                    let kk = submatrix(&fz.a, &c.w, &c.w);
                    let y = solve_checked_vec(&kk, &g, "dual correction")?;
                    s += fz.l.columns(c.w.start, k) * &y;
                    y
                } else {
                    let sup = c.sup.as_ref().expect("reference norm has a supremizer family");
                    let bw = comb(&sup.a, &fz.theta, c.w.clone());
                    let bl = comb(&sup.l, &fz.psi, 0..self.model.l());
                    let kk = bw.transpose() * &bw;
                    let y = solve_checked_vec(&kk, &g, "dual correction")?;
                    s += bl.transpose() * (&bw * &y);
                    y
                };
                let uk = if method == Method::PrimalDual { r } else { 0 };
                Ok(OnlineSolution {
                    method,
                    s,
                    u,
                    y,
                    system_size: uk + k,
                    online_cost: cube(uk) + cube(k),
                    approx_x: ux,
                    riesz_x: None,
                })
            }
            Method::Saddle if self.energy() => {
                let at = submatrix(&fz.a, &c.t, &c.t);
                let y = solve_checked_vec(&at, &subvec(&fz.b, &c.t), "saddle system")?;
                let s = fz.l.columns(c.t.start, c.t.len()) * &y;
                let p = c.t.len();
                Ok(OnlineSolution {
                    method,
                    s,
                    u: DVector::zeros(0),
                    approx_x: self.embed(&c.t, &y),
                    y,
                    system_size: p,
                    online_cost: cube(p),
                    riesz_x: None,
                })
            }
            Method::Saddle => self.saddle_reference(xi, &fz),
        }
    }

    /// `T(ξ) = [W_r(ξ), W]` in `X` coordinates.
    fn saddle_test_coefficients(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        let c = &self.cache;
        let (r, k) = (self.r(), self.k());
        let cw = self.test_coefficients(xi)?;
        let mut ct = DMatrix::zeros(c.nx(), r + k);
        ct.columns_mut(0, r).copy_from(&cw);
        for j in 0..k {
            ct[(c.w.start + j, r + j)] = 1.0;
        }
        Ok(ct)
    }

    fn saddle_reference(&self, xi: &[f64], fz: &Frozen) -> Result<OnlineSolution> {
        let c = &self.cache;
        let r = self.r();
        let sup = c.sup.as_ref().expect("reference norm has a supremizer family");
        let ct = self.saddle_test_coefficients(xi)?;
        let bt = comb(&sup.a, &fz.theta, 0..c.nx()) * &ct;
        let bl = comb(&sup.l, &fz.psi, 0..self.model.l());
        let tav = ct.transpose() * fz.a.columns(c.v.start, r);
        let tb = ct.transpose() * &fz.b;
        let (uk, map) = deflate(&bt);
        let q = map.ncols();
        let bp = map.transpose() * &tav;
        let mut block = DMatrix::zeros(q + r, q + r);
        block.view_mut((0, 0), (q, q)).fill_with_identity();
        block.view_mut((0, q), (q, r)).copy_from(&bp);
        block.view_mut((q, 0), (r, q)).copy_from(&bp.transpose());
        let mut rhs = DMatrix::zeros(q + r, 1);
        rhs.view_mut((0, 0), (q, 1)).copy_from(&(map.transpose() * &tb));
        let sol = solve_checked(&block, &rhs, "saddle point system")?;
        let yp = sol.rows(0, q).column(0).into_owned();
        let u = sol.rows(q, r).column(0).into_owned();
        let ux = self.embed(&c.v, &u);
        let s = &fz.l * &ux + bl.transpose() * (&uk * &yp);
        let y = &map * &yp;
        let size = 2 * r + self.k();
        Ok(OnlineSolution {
            method: Method::Saddle,
            s,
            u,
            riesz_x: Some(&ct * &y),
            y,
            system_size: size,
            online_cost: COST_CONSTANT * (size as f64).powi(3),
            approx_x: ux,
        })
    }

    /// Full-order vector whose residual the estimators measure: `u_r` for
    /// primal-type solves, `t = u + R_V0⁻¹ Aᵀ T y` for saddle solves.
    pub fn full_approximation(&self, xi: &[f64], sol: &OnlineSolution) -> Result<DVector<f64>> {
        let mut t = &self.cache.x * &sol.approx_x;
        if let Some(rx) = &sol.riesz_x {
            let a = self.model.assemble_a(xi)?;
            t += self.model.v0().apply_inverse(&a.tr_mul_vec(&(&self.cache.x * rx)));
        }
        Ok(t)
    }

    /// `‖A x̃ − b‖_{V0'}` for the approximation of `sol`.
    pub fn residual_norm(&self, xi: &[f64], sol: &OnlineSolution) -> Result<f64> {
        if sol.riesz_x.is_some() {
            let t = self.full_approximation(xi, sol)?;
            let r = self.model.assemble_a(xi)?.mul_vec(&t) - self.model.assemble_b(xi)?;
            return Ok(self.model.v0().dual_norm(&r));
        }
        self.model.check_param(xi)?;
        let c = &self.cache;
        let theta = self.model.a_form().coefficients(xi);
        let phi = self.model.b_form().coefficients(xi);
        let support: Vec<usize> = (0..c.nx()).filter(|&i| sol.approx_x[i] != 0.0).collect();
        let rows = c.res.b.first().map_or(0, |b| b.len());
        let mut e = DVector::zeros(rows);
        for (b, f) in c.res.b.iter().zip(&phi) {
            e.axpy(-*f, b, 1.0);
        }
        for (blk, t) in c.res.a.iter().zip(&theta) {
            for &i in &support {
                e.axpy(*t * sol.approx_x[i], &blk.column(i), 1.0);
            }
        }
        Ok(e.norm())
    }

    /// `‖P_m(ξ)(A x̃ − b)‖_{V0}`, the preconditioned residual norm.
    pub fn preconditioned_residual_norm(&self, xi: &[f64], sol: &OnlineSolution) -> Result<f64> {
        let t = self.full_approximation(xi, sol)?;
        let r = self.model.assemble_a(xi)?.mul_vec(&t) - self.model.assemble_b(xi)?;
        let rm = DMatrix::from_column_slice(r.len(), 1, r.as_slice());
        let pr = match &self.precond {
            Some(p) => p.apply(&self.model, xi, &rm)?,
            None => self.model.v0().apply_inverse_mat(&rm),
        };
        Ok(self.model.v0().norm(&pr.column(0).into_owned()))
    }

    /// Whitened dual residual `D C_z`, whose spectral norm is the dual factor:
    /// `D = Lᵀ − Aᵀ Q̃` for primal-type methods, the residual of the best
    /// approximation of `Lᵀ` from `Aᵀ T` for the saddle method.
    pub fn dual_residual(&self, xi: &[f64], method: Method) -> Result<DMatrix<f64>> {
        let fz = self.freeze(xi)?;
        let c = &self.cache;
        let l = self.model.l();
        let k = if method == Method::Primal { 0 } else { self.k() };
        let d = match (method, self.energy()) {
            (Method::Saddle, true) => {
                let g = comb(&c.res.a, &fz.theta, c.t.clone());
                let rl = comb(&c.res.l, &fz.psi, 0..l);
                let coef = lstsq(&g, &rl, 1e-13);
                rl - g * coef
            }
            (Method::Saddle, false) => {
                let sup = c.sup.as_ref().expect("supremizer family");
                let ct = self.saddle_test_coefficients(xi)?;
                let bt = comb(&sup.a, &fz.theta, 0..c.nx()) * ct;
                let bl = comb(&sup.l, &fz.psi, 0..l);
                let coef = lstsq(&bt, &bl, 1e-13);
                bl - bt * coef
            }
            (_, true) => {
                let rl = comb(&c.res.l, &fz.psi, 0..l);
                if k == 0 {
                    rl
                } else {
                    let kk = submatrix(&fz.a, &c.w, &c.w);
                    let rhs = fz.l.columns(c.w.start, k).transpose();
                    let xd = solve_checked(&kk, &rhs, "dual correction")?;
                    rl - comb(&c.res.a, &fz.theta, c.w.clone()) * xd
                }
            }
            (_, false) => {
                let sup = c.sup.as_ref().expect("supremizer family");
                let bl = comb(&sup.l, &fz.psi, 0..l);
                if k == 0 {
                    bl
                } else {
                    let bw = comb(&sup.a, &fz.theta, c.w.clone());
                    let kk = bw.transpose() * &bw;
                    let xd = solve_checked(&kk, &(bw.transpose() * &bl), "dual correction")?;
                    bl - bw * xd
                }
            }
        };
        Ok(d * self.model.r_z_factor())
    }

    /// Whitened residual `(Lᵀ − Aᵀ W c) C_z` with `c` the least-squares fit
    /// over the dual basis, used to pick output directions for saddle runs.
    pub fn dual_residual_least_squares(&self, xi: &[f64]) -> Result<DMatrix<f64>> {
        let fz = self.freeze(xi)?;
        let c = &self.cache;
        let l = self.model.l();
        let (g, rl) = match &c.sup {
            None => (comb(&c.res.a, &fz.theta, c.w.clone()), comb(&c.res.l, &fz.psi, 0..l)),
            Some(sup) => (comb(&sup.a, &fz.theta, c.w.clone()), comb(&sup.l, &fz.psi, 0..l)),
        };
        let d = if g.ncols() == 0 {
            rl
        } else {
            let coef = lstsq(&g, &rl, 1e-13);
            rl - g * coef
        };
        Ok(d * self.model.r_z_factor())
    }

    /// `min_{t ∈ T} ‖A t − b‖_{V0'}` over the energy-norm saddle test space.
    pub fn min_residual_over_test_space(&self, xi: &[f64]) -> Result<f64> {
        let fz = self.freeze(xi)?;
        let c = &self.cache;
        let phi = self.model.b_form().coefficients(xi);
        let g = comb(&c.res.a, &fz.theta, c.t.clone());
        let rows = c.res.b.first().map_or(0, |b| b.len());
        let mut rb = DMatrix::zeros(rows, 1);
        for (b, f) in c.res.b.iter().zip(&phi) {
            rb.column_mut(0).axpy(*f, b, 1.0);
        }
        if g.ncols() == 0 {
            return Ok(rb.norm());
        }
        let coef = lstsq(&g, &rb, 1e-13);
        Ok((rb - g * coef).norm())
    }

    /// Full-order test spaces of `method` at `ξ`: the primal test space and
    /// the space entering the output constant. Columns span the spaces; the
    /// saddle space is orthonormalized.
    pub fn explicit_test_spaces(&self, xi: &[f64], method: Method) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.model.check_param(xi)?;
        let n = self.model.n();
        let v = self.primal.matrix();
        let w_r = match self.precond.as_ref().filter(|p| p.m() > 0) {
            Some(p) => p.test_space(&self.model, xi, v)?,
            None => v.clone(),
        };
        let w = self.dual.matrix();
        Ok(match method {
            Method::Primal => (w_r.clone(), w_r),
            Method::Dual | Method::PrimalDual => (w_r, w.clone()),
            Method::Saddle => {
                let t = if self.energy() {
                    self.cache.x.columns(self.cache.t.start, self.cache.t.len()).into_owned()
                } else {
                    crate::linalg::dense::orth_range(&hcat(&[&w_r, w], n), 1e-10)
                };
                (t.clone(), t)
            }
        })
    }

    /// `sup_z' ‖D z'‖_{V0'} / ‖z'‖_{Z'}`.
    pub fn dual_factor(&self, xi: &[f64], method: Method) -> Result<f64> {
        Ok(spectral_norm(&self.dual_residual(xi, method)?))
    }
}

/// Deflation of `B = U Σ Vᵀ`: returns `U_k` and `V_k Σ_k⁻¹` over the
/// singular values above the threshold.
fn deflate(b: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let p = b.ncols();
    if p == 0 || b.nrows() == 0 {
        return (DMatrix::zeros(b.nrows(), 0), DMatrix::zeros(p, 0));
    }
    let svd = b.clone().svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > DEFLATION_TOL * smax)
        .collect();
    let uk = DMatrix::from_fn(b.nrows(), keep.len(), |i, j| u[(i, keep[j])]);
    let map = DMatrix::from_fn(p, keep.len(), |i, j| vt[(keep[j], i)] / svd.singular_values[keep[j]]);
    (uk, map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::orth_range;
    use crate::preconditioner::PrecondConfig;
    use crate::problems::{dual_truth_solve, generate, truth_solve, ProblemConfig, ProblemKind};
    use crate::projectors::explicit;
    use crate::spaces::DEFAULT_TOL_RANK;

    fn reduced(kind: ProblemKind, r: usize, dual_pts: usize, m: usize) -> ReducedModel {
        let model = Arc::new(generate(&ProblemConfig { kind, n: 64, d: 4, l: 3, seed: 4 }).unwrap());
        let precond = (m > 0).then(|| {
            let mut p = InverseInterpolant::new(&model, PrecondConfig { sketch_size: 20, ..Default::default() }).unwrap();
            for xi in model.domain().sample(m, 77) {
                p.add_point(&model, &xi).unwrap();
            }
            p
        });
        let mut red = ReducedModel::empty(model.clone(), DEFAULT_TOL_RANK, precond).unwrap();
        for xi in model.domain().sample(r, 11) {
            red.enrich_primal(&truth_solve(&model, &xi).unwrap());
        }
        for xi in model.domain().sample(dual_pts, 12) {
            red.enrich_dual(&dual_truth_solve(&model, &xi).unwrap());
        }
        red
    }

    fn check_against_explicit(red: &ReducedModel) {
        let model = red.model();
        let v = red.primal().matrix().clone();
        let w = red.dual().matrix().clone();
        for xi in model.domain().sample(3, 21) {
            let w_r = match red.preconditioner() {
                Some(p) => p.test_space(model, &xi, &v).unwrap(),
                None => v.clone(),
            };
            let scale = crate::problems::truth_output(model, &xi).unwrap().norm();
            let pg = explicit::petrov_galerkin_solve(model, &xi, &v, &w_r).unwrap();
            let on = red.solve(&xi, Method::Primal).unwrap();
            assert!((&pg.s - &on.s).norm() < 1e-8 * scale, "primal");
            let pd = explicit::primal_dual_solve(model, &xi, &v, &w_r, &w).unwrap();
            let on = red.solve(&xi, Method::PrimalDual).unwrap();
            assert!((&pd.s - &on.s).norm() < 1e-8 * scale, "primal-dual");
            let du = explicit::dual_only_solve(model, &xi, &w).unwrap();
            let on = red.solve(&xi, Method::Dual).unwrap();
            assert!((&du.s - &on.s).norm() < 1e-8 * scale, "dual");
            let t = if model.norm_kind() == NormKind::Energy {
                orth_range(&hcat(&[&v, &w], model.n()), 1e-10)
            } else {
                hcat(&[&w_r, &w], model.n())
            };
            let sp = explicit::saddle_solve(model, &xi, &v, &t).unwrap();
            let on = red.solve(&xi, Method::Saddle).unwrap();
            assert!((&sp.s - &on.s).norm() < 1e-8 * scale, "saddle {} vs {}", sp.s, on.s);
        }
    }

    #[test]
    fn online_matches_explicit_spd() {
        check_against_explicit(&reduced(ProblemKind::Diffusion, 4, 1, 0));
    }

    #[test]
    fn online_matches_explicit_general() {
        check_against_explicit(&reduced(ProblemKind::AdvectionDiffusion, 4, 1, 0));
    }

    #[test]
    fn online_matches_explicit_preconditioned() {
        check_against_explicit(&reduced(ProblemKind::AdvectionDiffusion, 3, 1, 2));
    }

    #[test]
    fn residual_norm_matches_full_order() {
        for kind in [ProblemKind::Diffusion, ProblemKind::AdvectionDiffusion] {
            let red = reduced(kind, 3, 1, 0);
            let model = red.model();
            let xi = model.domain().sample(1, 5).pop().unwrap();
            for method in Method::ALL {
                let sol = red.solve(&xi, method).unwrap();
                let t = red.full_approximation(&xi, &sol).unwrap();
                let r = model.assemble_a(&xi).unwrap().mul_vec(&t) - model.assemble_b(&xi).unwrap();
                let direct = model.v0().dual_norm(&r);
                let cached = red.residual_norm(&xi, &sol).unwrap();
                assert!((direct - cached).abs() <= 1e-10 * direct.max(1e-300), "{kind:?} {method}");
            }
        }
    }

    #[test]
    fn empty_spaces_give_zero_output() {
        let model = Arc::new(generate(&ProblemConfig { kind: ProblemKind::Diffusion, n: 36, d: 2, l: 2, seed: 1 }).unwrap());
        let red = ReducedModel::empty(model.clone(), DEFAULT_TOL_RANK, None).unwrap();
        for method in Method::ALL {
            let sol = red.solve(model.reference(), method).unwrap();
            assert_eq!(sol.s.norm(), 0.0);
        }
        assert!(red.solve(&[100.0, 1.0], Method::Primal).is_err());
    }
}
