//! Full-order reference implementations of the projections. They take
//! explicit basis matrices and cost O(n) work per basis vector, so they serve
//! as oracles for the cached online solvers and for the diagnostics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::dense::{orth_range, solve_checked, solve_checked_vec};
use crate::model::{FullOrderModel, VMetric};

/// Reduced coordinates and output of a reference solve.
#[derive(Clone, Debug)]
pub struct ExplicitSolution {
    /// Coefficients of the primal approximation in the given basis.
    pub u: DVector<f64>,
    /// Coefficients of the correction term in the test/dual basis.
    pub y: DVector<f64>,
    /// Full-order primal approximation `u_r`.
    pub u_full: DVector<f64>,
    /// Full-order supremizer correction `R_V⁻¹ Aᵀ y` (zero without a correction).
    pub correction: DVector<f64>,
    pub s: DVector<f64>,
}

/// `R_V(ξ)`-orthogonal projection of `u` onto `span(V)`.
pub fn orthogonal_project(model: &FullOrderModel, xi: &[f64], v: &DMatrix<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
    if v.ncols() == 0 {
        return Ok(DVector::zeros(u.len()));
    }
    let metric = VMetric::new(model, xi)?;
    let rv = metric.apply_mat(v);
    let g = v.transpose() * &rv;
    let c = solve_checked_vec(&g, &(rv.transpose() * u), "orthogonal projection")?;
    Ok(v * c)
}

/// `(W_rᵀ A V) U = W_rᵀ b`, `s̃ = L V U`.
pub fn petrov_galerkin_solve(
    model: &FullOrderModel,
    xi: &[f64],
    v: &DMatrix<f64>,
    w_r: &DMatrix<f64>,
) -> Result<ExplicitSolution> {
    if v.ncols() != w_r.ncols() {
        return Err(Error::Shape(format!(
            "trial space has dimension {}, test space {}",
            v.ncols(),
            w_r.ncols()
        )));
    }
    let a = model.assemble_a(xi)?;
    let b = model.assemble_b(xi)?;
    let l = model.assemble_l(xi)?;
    let ar = w_r.transpose() * a.mul_dense(v);
    let u = solve_checked_vec(&ar, &(w_r.transpose() * &b), "Petrov-Galerkin")?;
    let u_full = v * &u;
    let s = l.mul_vec(&u_full);
    let correction = DVector::zeros(u_full.len());
    Ok(ExplicitSolution { u, y: DVector::zeros(0), u_full, correction, s })
}

/// Primal solve with test space `W_r`, then the dual correction over `W`.
pub fn primal_dual_solve(
    model: &FullOrderModel,
    xi: &[f64],
    v: &DMatrix<f64>,
    w_r: &DMatrix<f64>,
    w: &DMatrix<f64>,
) -> Result<ExplicitSolution> {
    let mut sol = petrov_galerkin_solve(model, xi, v, w_r)?;
    if w.ncols() == 0 {
        return Ok(sol);
    }
    let metric = VMetric::new(model, xi)?;
    let a = model.assemble_a(xi)?;
    let b = model.assemble_b(xi)?;
    let l = model.assemble_l(xi)?;
    let z = metric.apply_inverse_mat(&a.tr_mul_dense(w));
    let k = a.tr_mul_dense(w).transpose() * &z;
    let r = &b - a.mul_vec(&sol.u_full);
    let y = solve_checked_vec(&k, &(w.transpose() * r), "dual correction")?;
    sol.correction = &z * &y;
    sol.s += l.mul_vec(&sol.correction);
    sol.y = y;
    Ok(sol)
}

/// Primal-dual with an empty primal space.
pub fn dual_only_solve(model: &FullOrderModel, xi: &[f64], w: &DMatrix<f64>) -> Result<ExplicitSolution> {
    let empty = DMatrix::zeros(model.n(), 0);
    primal_dual_solve(model, xi, &empty, &empty, w)
}

/// Saddle-point projection onto trial space `V` with test space `T`:
/// ```text
/// [ Tᵀ A R_V⁻¹ Aᵀ T   Tᵀ A V ] [y]   [Tᵀ b]
/// [ Vᵀ Aᵀ T           0      ] [u] = [ 0  ]
/// ```
/// with `s̃ = L V u + L R_V⁻¹ Aᵀ T y`. `T` is orthonormalised first.
pub fn saddle_solve(
    model: &FullOrderModel,
    xi: &[f64],
    v: &DMatrix<f64>,
    t: &DMatrix<f64>,
) -> Result<ExplicitSolution> {
    let metric = VMetric::new(model, xi)?;
    let a = model.assemble_a(xi)?;
    let b = model.assemble_b(xi)?;
    let l = model.assemble_l(xi)?;
    let tq = orth_range(t, 1e-10);
    let z = metric.apply_inverse_mat(&a.tr_mul_dense(&tq));
    // Euclidean coordinates of R_V⁻¹ Aᵀ T in the R_V metric.
    let zl = metric.lift_mat(&z);
    let svd = zl.clone().svd(true, true);
    let smax = if svd.singular_values.is_empty() { 0.0 } else { svd.singular_values.max() };
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * smax)
        .collect();
    let vt = svd.v_t.expect("requested");
    // Deflated test basis T' = T V_k Σ_k⁻¹, for which the (1,1) block is the identity.
    let map = DMatrix::from_fn(tq.ncols(), keep.len(), |i, j| vt[(keep[j], i)] / svd.singular_values[keep[j]]);
    let tp = &tq * &map;
    let zp = &z * &map;
    let (q, r) = (tp.ncols(), v.ncols());
    let bmat = tp.transpose() * a.mul_dense(v);
    let mut block = DMatrix::zeros(q + r, q + r);
    block.view_mut((0, 0), (q, q)).fill_with_identity();
    block.view_mut((0, q), (q, r)).copy_from(&bmat);
    block.view_mut((q, 0), (r, q)).copy_from(&bmat.transpose());
    let mut rhs = DMatrix::zeros(q + r, 1);
    rhs.view_mut((0, 0), (q, 1)).copy_from(&(tp.transpose() * &b));
    let x = solve_checked(&block, &rhs, "saddle point system")?;
    let y = x.rows(0, q).column(0).into_owned();
    let u = x.rows(q, r).column(0).into_owned();
    let u_full = v * &u;
    let correction = &zp * &y;
    let s = l.mul_vec(&u_full) + l.mul_vec(&correction);
    Ok(ExplicitSolution { u, y: &map * y, u_full, correction, s })
}
