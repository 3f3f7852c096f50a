//! Quasi-optimality constants `δ_{V,S}`, `δ^L_S` and the discrete inf-sup
//! constant `α_{V,S}`, measured in the model's V-norm.
//!
//! With `R_V = C Cᵀ`, the map `x ↦ Cᵀ x` is an isometry from the V-norm to the
//! Euclidean norm and `r ↦ C⁻¹ r` one from the dual norm. The supremizers
//! `R_V⁻¹ Aᵀ S` lift to `C⁻¹ Aᵀ S`, so every constant reduces to principal
//! angles between small orthonormal frames. This avoids forming `1 − λ_min`
//! of a generalized eigenproblem, which loses half the digits near `δ = 0`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::dense::{min_singular_value, orth_range, project_out, spectral_norm};
use crate::model::{FullOrderModel, VMetric};

/// Relative singular value at which the supremizer frame counts as rank deficient.
const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantsReport {
    pub xi: Vec<f64>,
    pub delta_vw: f64,
    pub delta_l: f64,
    pub alpha: f64,
}

/// Orthonormal frame of `C⁻¹ A(ξ)ᵀ S`; errors if the columns are dependent.
fn supremizer_frame(metric: &VMetric<'_>, model: &FullOrderModel, xi: &[f64], s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if s.ncols() == 0 {
        return Ok(DMatrix::zeros(model.n(), 0));
    }
    let a = model.assemble_a(xi)?;
    let z = metric.whiten_mat(&a.tr_mul_dense(s));
    let svd = z.svd(true, false);
    let sv = &svd.singular_values;
    let smax = sv.max();
    if !(sv.min() > DEGENERACY_TOL * smax) {
        return Err(Error::DegenerateTestSpace(format!(
            "test columns are dependent under A(ξ)ᵀ (σ_min/σ_max = {:.3e})",
            sv.min() / smax
        )));
    }
    Ok(svd.u.expect("requested"))
}

fn trial_frame(metric: &VMetric<'_>, v: &DMatrix<f64>) -> DMatrix<f64> {
    if v.ncols() == 0 {
        return v.clone();
    }
    orth_range(&metric.lift_mat(v), 1e-13)
}

fn check_rows(model: &FullOrderModel, m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != model.n() {
        return Err(Error::Shape(format!("{what} has {} rows, model has n = {}", m.nrows(), model.n())));
    }
    Ok(())
}

/// `δ_{V,S} = max_{v ∈ V} min_{y ∈ S} ‖v − R_V⁻¹ Aᵀ y‖_V / ‖v‖_V`.
pub fn delta_vw(model: &FullOrderModel, xi: &[f64], v: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<f64> {
    Ok(delta_alpha(model, xi, v, s)?.0)
}

/// `α_{V,S} = min_{v ∈ V} max_{y ∈ S} ⟨Av, y⟩ / (‖v‖_V ‖Aᵀ y‖_{V'})`.
pub fn infsup_alpha(model: &FullOrderModel, xi: &[f64], v: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<f64> {
    Ok(delta_alpha(model, xi, v, s)?.1)
}

fn delta_alpha(model: &FullOrderModel, xi: &[f64], v: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<(f64, f64)> {
    check_rows(model, v, "trial basis")?;
    check_rows(model, s, "test basis")?;
    let metric = VMetric::new(model, xi)?;
    let qz = supremizer_frame(&metric, model, xi, s)?;
    let qv = trial_frame(&metric, v);
    if qv.ncols() == 0 {
        return Ok((0.0, 1.0));
    }
    let delta = spectral_norm(&project_out(&qz, &qv)).min(1.0);
    let alpha = if qz.ncols() < qv.ncols() {
        0.0
    } else {
        min_singular_value(&(qz.transpose() * &qv)).min(1.0)
    };
    Ok((delta, alpha))
}

/// `δ^L_S = sup_{z'} min_{y ∈ S} ‖Lᵀ z' − Aᵀ y‖_{V'} / ‖z'‖_{Z'}`.
pub fn delta_l(model: &FullOrderModel, xi: &[f64], s: &DMatrix<f64>) -> Result<f64> {
    check_rows(model, s, "test basis")?;
    let metric = VMetric::new(model, xi)?;
    let qz = supremizer_frame(&metric, model, xi, s)?;
    let lt = model.assemble_l(xi)?.transpose().to_dense();
    let g = metric.whiten_mat(&lt) * model.r_z_factor();
    let resid = if qz.ncols() == 0 { g } else { project_out(&qz, &g) };
    Ok(spectral_norm(&resid))
}

/// Constants at one point: `δ` and `α` for the pair `(V, S)`, `δ^L` for `S_dual`.
pub fn report(
    model: &FullOrderModel,
    xi: &[f64],
    v: &DMatrix<f64>,
    s: &DMatrix<f64>,
    s_dual: &DMatrix<f64>,
) -> Result<ConstantsReport> {
    let (delta_vw, alpha) = delta_alpha(model, xi, v, s)?;
    let delta_l = delta_l(model, xi, s_dual)?;
    Ok(ConstantsReport { xi: xi.to_vec(), delta_vw, delta_l, alpha })
}

/// Right-hand side of the quasi-optimality bound, `(1 − δ²)^{-1/2}`, or
/// infinity when `δ = 1`.
pub fn quasi_optimality_factor(delta: f64) -> f64 {
    let g = 1.0 - delta * delta;
    if g > 0.0 {
        g.sqrt().recip()
    } else {
        f64::INFINITY
    }
}

/// Power-iteration estimate of the continuity constant
/// `β = sup ‖A v‖_{V'} / ‖v‖_V` at `ξ`. Diagnostic only.
pub fn continuity_estimate(model: &FullOrderModel, xi: &[f64], iterations: usize) -> Result<f64> {
    let metric = VMetric::new(model, xi)?;
    let chol = metric.factor();
    let a = model.assemble_a(xi)?;
    let n = model.n();
    // Iterate with M = C⁻¹ A C⁻ᵀ and Mᵀ = C⁻¹ Aᵀ C⁻ᵀ.
    let mut x = DVector::from_fn(n, |i, _| 1.0 + (i % 7) as f64 * 0.1);
    x /= x.norm();
    let mut est = 0.0;
    for _ in 0..iterations.max(1) {
        let mut u = x.clone();
        chol.solve_upper_in_place(u.as_mut_slice());
        let y = chol.whiten(&a.mul_vec(&u));
        est = y.norm();
        let mut t = y;
        chol.solve_upper_in_place(t.as_mut_slice());
        let w = chol.whiten(&a.tr_mul_vec(&t));
        let nw = w.norm();
        if nw == 0.0 {
            return Ok(0.0);
        }
        x = w / nw;
    }
    Ok(est)
}
