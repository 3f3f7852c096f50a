//! Greedy construction of the primal and dual reduced spaces.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{estimate_many, select_output_direction, EstimatorConfig};
use crate::model::{FullOrderModel, NormKind};
use crate::preconditioner::{InverseInterpolant, PrecondConfig};
use crate::projectors::{Method, ReducedModel, COST_CONSTANT};
use crate::spaces::DEFAULT_TOL_RANK;

pub const DEFAULT_TRAINING_SIZE: usize = 200;
pub const DEFAULT_TRAINING_SEED: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrainingSet {
    Explicit { points: Vec<Vec<f64>> },
    Sample { count: usize, seed: u64 },
}

impl Default for TrainingSet {
    fn default() -> Self {
        TrainingSet::Sample { count: DEFAULT_TRAINING_SIZE, seed: DEFAULT_TRAINING_SEED }
    }
}

impl TrainingSet {
    pub fn points(&self, model: &FullOrderModel) -> Result<Vec<Vec<f64>>> {
        let pts = match self {
            TrainingSet::Explicit { points } => points.clone(),
            TrainingSet::Sample { count, seed } => model.domain().sample(*count, *seed),
        };
        if pts.is_empty() {
            return Err(Error::EmptySample("training set is empty".into()));
        }
        for p in &pts {
            model.check_param(p)?;
        }
        Ok(pts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Enrichment {
    #[default]
    Full,
    Partial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    #[default]
    Simultaneous,
    Alternate,
}

fn default_method() -> Method {
    Method::PrimalDual
}

fn default_tol_rank() -> f64 {
    DEFAULT_TOL_RANK
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedyConfig {
    #[serde(default)]
    pub training: TrainingSet,
    pub max_iterations: usize,
    #[serde(default)]
    pub enrichment: Enrichment,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    /// Interpolated inverse used for test spaces; `None` disables it.
    #[serde(default)]
    pub preconditioner: Option<PrecondConfig>,
    /// Stop once `sup Δ` drops below this value.
    #[serde(default)]
    pub stop_threshold: f64,
    #[serde(default = "default_tol_rank")]
    pub tol_rank: f64,
}

impl GreedyConfig {
    pub fn new(max_iterations: usize) -> Self {
        Self {
            training: TrainingSet::default(),
            max_iterations,
            enrichment: Enrichment::Full,
            schedule: Schedule::Simultaneous,
            method: Method::PrimalDual,
            estimator: EstimatorConfig::default(),
            preconditioner: None,
            stop_threshold: 0.0,
            tol_rank: DEFAULT_TOL_RANK,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if !matches!(self.method, Method::PrimalDual | Method::Saddle) {
            return Err(Error::Config(format!(
                "greedy estimator method must be primal-dual or saddle, got {}",
                self.method
            )));
        }
        if !(self.tol_rank > 0.0 && self.tol_rank < 1.0) {
            return Err(Error::Config(format!("tol_rank {} outside (0, 1)", self.tol_rank)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Enriched {
    Primal,
    Dual,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub selected_index: usize,
    pub xi: Vec<f64>,
    /// `sup Δ` over the training set before this iteration's enrichment.
    pub sup_delta: f64,
    pub enriched: Enriched,
    pub primal_accepted: bool,
    pub dual_accepted: usize,
    pub dual_rejected: usize,
    /// Partial enrichment only: the chosen output direction `z'`.
    pub output_direction: Option<Vec<f64>>,
    pub r: usize,
    pub k: usize,
    pub p: usize,
    pub factorizations: usize,
    pub preconditioner_points: usize,
    /// `C · size³` for one online solve of the configured method at the new dimensions.
    pub online_cost: f64,
    /// `Δ` at all previously selected points, evaluated before this enrichment.
    pub delta_at_previous: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub schedule: Schedule,
    pub enrichment: Enrichment,
    pub method: Method,
    pub training_size: usize,
    pub stopped_early: bool,
    pub iterations: Vec<TraceEntry>,
}

pub struct GreedyOutput {
    pub reduced: ReducedModel,
    pub trace: GreedyTrace,
}

/// A failed run with the iterations completed before the failure.
#[derive(Debug)]
pub struct GreedyFailure {
    pub trace: GreedyTrace,
    pub error: Error,
}

impl std::fmt::Display for GreedyFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "greedy failed after {} iterations: {}", self.trace.iterations.len(), self.error)
    }
}

impl std::error::Error for GreedyFailure {}

/// Index of the largest value; ties go to the lowest index. NaN never wins.
pub fn argmax_delta(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Online cost of one solve of `method` at dimensions `(r, k, p)`.
pub fn online_cost(method: Method, norm: NormKind, r: usize, k: usize, p: usize) -> f64 {
    let c = |s: usize| COST_CONSTANT * (s as f64).powi(3);
    match method {
        Method::Primal => c(r),
        Method::Dual => c(k),
        Method::PrimalDual => c(r) + c(k),
        Method::Saddle => match norm {
            NormKind::Energy => c(p),
            NormKind::Reference => c(2 * r + k),
        },
    }
}

/// Runs the configured greedy loop from empty spaces.
pub fn run(model: Arc<FullOrderModel>, cfg: &GreedyConfig) -> std::result::Result<GreedyOutput, GreedyFailure> {
    let mut trace = GreedyTrace {
        schedule: cfg.schedule,
        enrichment: cfg.enrichment,
        method: cfg.method,
        training_size: 0,
        stopped_early: false,
        iterations: Vec::new(),
    };
    let fail = |trace: &GreedyTrace, error: Error| GreedyFailure { trace: trace.clone(), error };
    if let Err(e) = cfg.validate() {
        return Err(fail(&trace, e));
    }
    let training = cfg.training.points(&model).map_err(|e| fail(&trace, e))?;
    trace.training_size = training.len();
    let precond = match &cfg.preconditioner {
        Some(pc) => Some(InverseInterpolant::new(&model, pc.clone()).map_err(|e| fail(&trace, e))?),
        None => None,
    };
    let mut red = ReducedModel::empty(model.clone(), cfg.tol_rank, precond).map_err(|e| fail(&trace, e))?;
    let mut factorizations = 0;
    let mut selected: Vec<usize> = Vec::new();
    for i in 1..=cfg.max_iterations {
        let deltas: Vec<f64> = match estimate_many(&red, &training, cfg.method, &cfg.estimator) {
            Ok(v) => v.into_iter().map(|(_, rec)| rec.delta).collect(),
            Err(e) => return Err(fail(&trace, e)),
        };
        let Some(best) = argmax_delta(&deltas) else {
            return Err(fail(&trace, Error::EmptySample("no finite estimate on the training set".into())));
        };
        let sup_delta = deltas[best];
        if !sup_delta.is_finite() {
            return Err(fail(&trace, Error::Singular(format!("estimate at sample {best} is not finite"))));
        }
        if sup_delta < cfg.stop_threshold {
            trace.stopped_early = true;
            break;
        }
        let xi = training[best].clone();
        let step = enrich_at(&mut red, &xi, i, cfg).map_err(|e| fail(&trace, e))?;
        factorizations += 1;
        let delta_at_previous = selected.iter().map(|&j| deltas[j]).collect();
        selected.push(best);
        trace.iterations.push(TraceEntry {
            iteration: i,
            selected_index: best,
            xi,
            sup_delta,
            enriched: step.enriched,
            primal_accepted: step.primal_accepted,
            dual_accepted: step.dual_accepted,
            dual_rejected: step.dual_rejected,
            output_direction: step.direction,
            r: red.r(),
            k: red.k(),
            p: red.p(),
            factorizations,
            preconditioner_points: red.preconditioner().map_or(0, |p| p.m()),
            online_cost: online_cost(cfg.method, model.norm_kind(), red.r(), red.k(), red.p()),
            delta_at_previous,
        });
    }
    Ok(GreedyOutput { reduced: red, trace })
}

struct Step {
    enriched: Enriched,
    primal_accepted: bool,
    dual_accepted: usize,
    dual_rejected: usize,
    direction: Option<Vec<f64>>,
}

fn enrich_at(red: &mut ReducedModel, xi: &[f64], i: usize, cfg: &GreedyConfig) -> Result<Step> {
    let model = red.model_arc();
    let enriched = match cfg.schedule {
        Schedule::Simultaneous => Enriched::Both,
        Schedule::Alternate if i % 2 == 1 => Enriched::Primal,
        Schedule::Alternate => Enriched::Dual,
    };
    let factor = model.factor_a(xi)?;
    let u = if enriched != Enriched::Dual {
        Some(factor.solve(&model.assemble_b(xi)?))
    } else {
        None
    };
    let mut direction = None;
    let q = if enriched != Enriched::Primal {
        let lt = model.assemble_l(xi)?.transpose().to_dense();
        Some(match cfg.enrichment {
            Enrichment::Full => factor.solve_transpose_mat(&lt),
            Enrichment::Partial => {
                let (_, z) = select_output_direction(red, xi, cfg.method)?;
                let y = factor.solve_transpose(&(&lt * &z));
                direction = Some(z.iter().copied().collect());
                nalgebra::DMatrix::from_column_slice(y.len(), 1, y.as_slice())
            }
        })
    } else {
        None
    };
    red.add_preconditioner_point(xi, factor)?;
    let offered = q.as_ref().map_or(0, |q| q.ncols());
    let (primal_accepted, dual_accepted) = red.enrich(u.as_ref(), q.as_ref());
    Ok(Step {
        enriched,
        primal_accepted,
        dual_accepted,
        dual_rejected: offered - dual_accepted,
        direction,
    })
}

/// Best-approximation error `min_{v ∈ V} ‖u − v‖_{V0}` of a truth solution.
pub fn best_approximation_error(red: &ReducedModel, u: &DVector<f64>) -> f64 {
    let v = red.primal();
    let e = u - v.matrix() * v.coefficients(u);
    red.model().v0().norm(&e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::AlphaRule;
    use crate::problems::{generate, truth_solve, ProblemConfig, ProblemKind};
    use proptest::prelude::*;

    fn model(kind: ProblemKind, l: usize) -> Arc<FullOrderModel> {
        Arc::new(generate(&ProblemConfig { kind, n: 100, d: 3, l, seed: 7 }).unwrap())
    }

    fn cfg(iters: usize) -> GreedyConfig {
        let mut c = GreedyConfig::new(iters);
        c.training = TrainingSet::Sample { count: 40, seed: 3 };
        c
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(argmax_delta(&[0.3]), Some(0));
        assert_eq!(argmax_delta(&[1.0, 2.0, 2.0]), Some(1));
        assert_eq!(argmax_delta(&[f64::NAN, 1.0]), Some(1));
        assert_eq!(argmax_delta(&[]), None);
    }

    proptest! {
        #[test]
        fn argmax_matches_linear_scan(vals in prop::collection::vec(0u8..20, 1..50)) {
            let v: Vec<f64> = vals.iter().map(|&x| x as f64).collect();
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let want = v.iter().position(|&x| x == max).unwrap();
            prop_assert_eq!(argmax_delta(&v), Some(want));
        }
    }

    #[test]
    fn single_iteration_dimensions() {
        let m = model(ProblemKind::Diffusion, 3);
        let out = run(m.clone(), &cfg(1)).unwrap();
        assert_eq!((out.reduced.r(), out.reduced.k()), (1, 3));
        let mut c = cfg(1);
        c.enrichment = Enrichment::Partial;
        let out = run(m.clone(), &c).unwrap();
        assert_eq!((out.reduced.r(), out.reduced.k()), (1, 1));
        assert!(out.trace.iterations[0].output_direction.is_some());
    }

    #[test]
    fn selected_point_is_resolved_after_full_enrichment() {
        let m = model(ProblemKind::Diffusion, 2);
        let out = run(m.clone(), &cfg(4)).unwrap();
        let it = &out.trace.iterations;
        for (n, e) in it.iter().enumerate().skip(1) {
            for (j, d) in e.delta_at_previous.iter().enumerate() {
                assert!(*d <= 1e-8 * it[j].sup_delta, "iteration {n}, point {j}: {d}");
            }
        }
    }

    #[test]
    fn alternate_schedule_parity_and_costs() {
        let m = model(ProblemKind::Diffusion, 2);
        let mut c = cfg(4);
        c.schedule = Schedule::Alternate;
        let out = run(m.clone(), &c).unwrap();
        let kinds: Vec<Enriched> = out.trace.iterations.iter().map(|e| e.enriched).collect();
        assert_eq!(kinds, [Enriched::Primal, Enriched::Dual, Enriched::Primal, Enriched::Dual]);
        assert_eq!(out.reduced.r(), 2);
        assert_eq!(out.trace.iterations[1].r, 1);
        let sim = run(m, &cfg(2)).unwrap();
        assert_eq!((sim.reduced.r(), sim.reduced.k()), (out.reduced.r(), out.reduced.k()));
        assert_eq!(out.trace.iterations.last().unwrap().factorizations, 2 * sim.trace.iterations.last().unwrap().factorizations);
    }

    #[test]
    fn traces_are_monotone_and_deterministic() {
        let m = model(ProblemKind::AdvectionDiffusion, 3);
        let mut c = cfg(5);
        c.method = Method::Saddle;
        c.enrichment = Enrichment::Partial;
        c.preconditioner = Some(PrecondConfig { sketch_size: 20, ..Default::default() });
        let a = run(m.clone(), &c).unwrap();
        let b = run(m, &c).unwrap();
        assert_eq!(serde_json::to_string(&a.trace).unwrap(), serde_json::to_string(&b.trace).unwrap());
        assert_eq!(a.reduced.primal().matrix(), b.reduced.primal().matrix());
        let it = &a.trace.iterations;
        for w in it.windows(2) {
            assert!(w[1].factorizations > w[0].factorizations);
            assert!(w[1].r >= w[0].r && w[1].k >= w[0].k && w[1].k <= w[0].k + 1);
            assert!(w[1].sup_delta.is_finite());
        }
        assert_eq!(it.last().unwrap().preconditioner_points, 5);
    }

    #[test]
    fn best_approximation_error_is_nonincreasing() {
        let m = model(ProblemKind::Diffusion, 2);
        let out = run(m.clone(), &cfg(5)).unwrap();
        let v = out.reduced.primal().matrix().clone();
        let validation = m.domain().sample(5, 99);
        let g = m.v0().matrix_arc();
        for xi in &validation {
            let u = truth_solve(&m, xi).unwrap();
            let mut prev = f64::INFINITY;
            for r in 0..=v.ncols() {
                let b = crate::spaces::Basis::from_columns(g.clone(), v.columns(0, r).into_owned(), DEFAULT_TOL_RANK).unwrap();
                let red = ReducedModel::new(m.clone(), b.clone(), crate::spaces::Basis::new(g.clone(), DEFAULT_TOL_RANK), None).unwrap();
                let e = best_approximation_error(&red, &u);
                assert!(e <= prev * (1.0 + 1e-12));
                prev = e;
            }
        }
    }

    #[test]
    fn failure_keeps_the_partial_trace() {
        let m = model(ProblemKind::AdvectionDiffusion, 2);
        let mut c = cfg(3);
        c.estimator.alpha = AlphaRule::MinTheta;
        let err = run(m, &c).err().unwrap();
        assert!(matches!(err.error, Error::Unsupported(_)));
        assert!(err.trace.iterations.is_empty());
        assert!(matches!(run(model(ProblemKind::Diffusion, 1), &cfg(0)).err().unwrap().error, Error::Config(_)));
    }

    #[test]
    fn config_parses_with_defaults() {
        let c: GreedyConfig = serde_json::from_str(r#"{"max_iterations": 3, "enrichment": "partial"}"#).unwrap();
        assert_eq!(c.training, TrainingSet::default());
        assert_eq!(c.method, Method::PrimalDual);
        assert!(serde_json::from_str::<GreedyConfig>(r#"{"max_iterations": 3, "bogus": 1}"#).is_err());
    }
}
