//! Online error estimates for the output, coercivity lower bounds and
//! effectivity statistics.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dense::{min_singular_value, top_eigenvector};
use crate::projectors::{Method, OnlineSolution, ReducedModel};
use crate::model::FullOrderModel;

/// Gap below which top eigenvalues are treated as one cluster.
pub const DIRECTION_GAP: f64 = 1e-10;
/// Output errors below this fraction of `‖s‖_Z` are excluded from η statistics.
pub const EXCLUSION_TOL: f64 = 1e-14;

/// How the coercivity constant entering `Δ = primal · dual / α` is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaRule {
    /// Min-theta for coercive-affine models, otherwise omitted.
    #[default]
    Auto,
    /// `min_k θ_k(ξ) / θ_k(ξ̄)`; requires a coercive-affine model.
    MinTheta,
    /// Smallest singular value of the whitened full-order operator (diagnostic).
    Exact,
    /// Drop the factor; the estimate is no longer certified.
    Omit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Residual in the `V0'` norm divided by `α`.
    #[default]
    Residual,
    /// Residual preconditioned by `P_m(ξ)`, without `α`.
    Preconditioned,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct EstimatorConfig {
    #[serde(default)]
    pub kind: EstimatorKind,
    #[serde(default)]
    pub alpha: AlphaRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub xi: Vec<f64>,
    pub method: Method,
    pub delta: f64,
    pub primal_factor: f64,
    pub dual_factor: f64,
    pub alpha: Option<f64>,
    pub certified: bool,
}

impl EstimateRecord {
    /// `method/certified`, `method/surrogate` or `method/preconditioned`.
    pub fn tag(&self, kind: EstimatorKind) -> String {
        let t = match (kind, self.certified) {
            (EstimatorKind::Preconditioned, _) => "preconditioned",
            (_, true) => "certified",
            _ => "surrogate",
        };
        format!("{}/{t}", self.method)
    }
}

/// Min-theta coercivity lower bound with respect to `R_V0 = A(ξ̄)`.
pub fn alpha_min_theta(model: &FullOrderModel, xi: &[f64]) -> Result<f64> {
    if !model.is_coercive_affine() {
        return Err(Error::Unsupported(
            "min-theta needs a coercive-affine model; supply α or use a surrogate estimator".into(),
        ));
    }
    model.check_param(xi)?;
    let th = model.a_form().coefficients(xi);
    let th0 = model.a_form().coefficients(model.reference());
    let mut alpha = f64::INFINITY;
    for (t, t0) in th.iter().zip(&th0) {
        if !(*t0 > 0.0) || *t < 0.0 {
            return Err(Error::Unsupported(format!(
                "min-theta needs positive affine coefficients (θ = {t}, θ̄ = {t0})"
            )));
        }
        alpha = alpha.min(t / t0);
    }
    Ok(alpha)
}

/// `inf_v ‖A(ξ) v‖_{V0'} / ‖v‖_{V0}` by a dense SVD of `C0⁻¹ A C0⁻ᵀ`.
pub fn alpha_exact(model: &FullOrderModel, xi: &[f64]) -> Result<f64> {
    let a = model.assemble_a(xi)?.to_dense();
    let chol = model.v0().factor();
    let left = chol.whiten_mat(&a);
    let mut m = chol.whiten_mat(&left.transpose());
    m.transpose_mut();
    Ok(min_singular_value(&m))
}

fn resolve_alpha(model: &FullOrderModel, xi: &[f64], rule: AlphaRule) -> Result<Option<f64>> {
    match rule {
        AlphaRule::Auto if model.is_coercive_affine() => alpha_min_theta(model, xi).map(Some),
        AlphaRule::Auto => Ok(None),
        AlphaRule::MinTheta => alpha_min_theta(model, xi).map(Some),
        AlphaRule::Exact => alpha_exact(model, xi).map(Some),
        AlphaRule::Omit => Ok(None),
    }
}

/// Error estimate for the online solution `sol` at `ξ`.
pub fn estimate(red: &ReducedModel, xi: &[f64], sol: &OnlineSolution, cfg: &EstimatorConfig) -> Result<EstimateRecord> {
    let model = red.model();
    let energy_saddle = sol.method == Method::Saddle && model.norm_kind() == crate::model::NormKind::Energy;
    let primal_factor = match cfg.kind {
        EstimatorKind::Preconditioned => red.preconditioned_residual_norm(xi, sol)?,
        EstimatorKind::Residual if energy_saddle => red.min_residual_over_test_space(xi)?,
        EstimatorKind::Residual => red.residual_norm(xi, sol)?,
    };
    let dual_factor = red.dual_factor(xi, sol.method)?;
    let alpha = match cfg.kind {
        EstimatorKind::Preconditioned => None,
        EstimatorKind::Residual => resolve_alpha(model, xi, cfg.alpha)?,
    };
    let mut delta = primal_factor * dual_factor;
    if let Some(a) = alpha {
        if !(a > 0.0) {
            return Err(Error::Unsupported(format!("coercivity bound α = {a} is not positive")));
        }
        delta /= a;
    }
    Ok(EstimateRecord {
        xi: xi.to_vec(),
        method: sol.method,
        delta,
        primal_factor,
        dual_factor,
        alpha,
        certified: alpha.is_some(),
    })
}

/// Solves and estimates at every point, in parallel, keeping the input order.
pub fn estimate_many(
    red: &ReducedModel,
    points: &[Vec<f64>],
    method: Method,
    cfg: &EstimatorConfig,
) -> Result<Vec<(OnlineSolution, EstimateRecord)>> {
    points
        .par_iter()
        .map(|xi| {
            let sol = red.solve(xi, method)?;
            let rec = estimate(red, xi, &sol, cfg)?;
            Ok((sol, rec))
        })
        .collect()
}

/// Output direction `z'` with `‖z'‖_{Z'} = 1` maximizing the dual residual,
/// and the attained value. Saddle runs measure the residual of the best
/// least-squares fit over the dual basis.
pub fn select_output_direction(red: &ReducedModel, xi: &[f64], method: Method) -> Result<(f64, DVector<f64>)> {
    let m = match method {
        Method::Saddle => red.dual_residual_least_squares(xi)?,
        _ => red.dual_residual(xi, Method::PrimalDual)?,
    };
    let gram = m.transpose() * &m;
    let (lam, y) = top_eigenvector(&gram, DIRECTION_GAP);
    Ok((lam.max(0.0).sqrt(), red.model().r_z_factor() * y))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectivityReport {
    pub sample_size: usize,
    pub included: usize,
    pub excluded_count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub maxmin_ratio: f64,
    /// Population standard deviation divided by the mean.
    pub nstd: f64,
    pub histogram: Histogram,
}

/// Statistics of `η = Δ / ‖s − s̃‖_Z`. Pairs whose error is below
/// `EXCLUSION_TOL · ‖s‖_Z`, or whose η is not finite and positive, are
/// excluded and counted.
pub fn effectivity_report(deltas: &[f64], errors: &[f64], output_norms: &[f64], bins: usize) -> Result<EffectivityReport> {
    if deltas.len() != errors.len() || deltas.len() != output_norms.len() {
        return Err(Error::Shape(format!(
            "{} estimates, {} errors and {} output norms",
            deltas.len(),
            errors.len(),
            output_norms.len()
        )));
    }
    if deltas.is_empty() {
        return Err(Error::EmptySample("no estimates".into()));
    }
    let eta: Vec<f64> = deltas
        .iter()
        .zip(errors)
        .zip(output_norms)
        .filter(|((_, e), s)| **e >= EXCLUSION_TOL * **s && **e > 0.0)
        .map(|((d, e), _)| d / e)
        .filter(|h| h.is_finite() && *h > 0.0)
        .collect();
    if eta.is_empty() {
        return Err(Error::EmptySample(format!("all {} samples were excluded", deltas.len())));
    }
    let k = eta.len() as f64;
    let mean = eta.iter().sum::<f64>() / k;
    let var = eta.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / k;
    let min = eta.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = bins.max(1);
    let width = (max - min) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { max } else { min + width * i as f64 }).collect();
    let mut counts = vec![0usize; bins];
    for h in &eta {
        let b = if width > 0.0 { (((h - min) / width) as usize).min(bins - 1) } else { 0 };
        counts[b] += 1;
    }
    Ok(EffectivityReport {
        sample_size: deltas.len(),
        included: eta.len(),
        excluded_count: deltas.len() - eta.len(),
        mean,
        min,
        max,
        maxmin_ratio: max / min,
        nstd: var.sqrt() / mean,
        histogram: Histogram { edges, counts },
    })
}

/// `‖s − s̃‖_Z` for each pair of output vectors.
pub fn output_errors(model: &FullOrderModel, truth: &[DVector<f64>], approx: &[DVector<f64>]) -> Vec<f64> {
    truth.iter().zip(approx).map(|(s, t)| model.z_norm(&(s - t))).collect()
}
