//! Synthetic benchmark problems on a structured grid and truth solves.
//!
//! Nodes are numbered row by row, `index = iy·nx + ix`. The grid shape is
//! `ny × nx` with `ny` the largest divisor of `n` not exceeding `√n`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::model::{
    AffineForm, AffineTerm, CoefficientFn, FullOrderModel, ModelParts, ParamRange, ParameterDomain,
    Symmetry,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    /// Symmetric diffusion with piecewise constant conductivity.
    Diffusion,
    /// Upwind advection-diffusion, nonsymmetric.
    AdvectionDiffusion,
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diffusion" => Ok(ProblemKind::Diffusion),
            "advection-diffusion" | "advection" => Ok(ProblemKind::AdvectionDiffusion),
            other => Err(Error::Config(format!("unknown problem kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub seed: u64,
}

/// Conductivity bounds of the region multipliers.
pub const DIFFUSION_RANGE: (f64, f64) = (0.1, 10.0);
/// Bounds of each advection velocity component.
pub const ADVECTION_RANGE: (f64, f64) = (0.0, 50.0);

#[derive(Clone, Copy, Debug)]
struct Grid {
    nx: usize,
    ny: usize,
}

impl Grid {
    fn for_size(n: usize) -> Result<Self> {
        let mut ny = (n as f64).sqrt().floor() as usize;
        while ny > 1 && n % ny != 0 {
            ny -= 1;
        }
        if ny < 2 {
            return Err(Error::Config(format!(
                "n = {n} does not factor into a grid with at least two rows"
            )));
        }
        Ok(Self { nx: n / ny, ny })
    }

    fn n(&self) -> usize {
        self.nx * self.ny
    }

    fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }
}

/// Accumulates face-based stiffness contributions per region.
struct Stiffness {
    n: usize,
    trips: Vec<Vec<(usize, usize, f64)>>,
}

impl Stiffness {
    fn new(n: usize, regions: usize) -> Self {
        Self { n, trips: vec![Vec::new(); regions] }
    }

    fn face(&mut self, region: usize, p: usize, q: usize, w: f64) {
        let t = &mut self.trips[region];
        t.extend([(p, p, w), (q, q, w), (p, q, -w), (q, p, -w)]);
    }

    fn boundary(&mut self, region: usize, p: usize, w: f64) {
        self.trips[region].push((p, p, w));
    }

    fn finish(self) -> Result<Vec<CsrMatrix>> {
        let n = self.n;
        self.trips
            .into_iter()
            .map(|t| CsrMatrix::from_triplets(n, n, t))
            .collect()
    }
}

fn heterogeneity(rng: &mut ChaCha8Rng) -> f64 {
    1.0 + 0.25 * (2.0 * rng.random::<f64>() - 1.0)
}

pub fn generate(cfg: &ProblemConfig) -> Result<FullOrderModel> {
    if cfg.l == 0 || cfg.l > cfg.n {
        return Err(Error::Config(format!("need 1 <= l <= n, got l = {}", cfg.l)));
    }
    match cfg.kind {
        ProblemKind::Diffusion => diffusion(cfg),
        ProblemKind::AdvectionDiffusion => advection_diffusion(cfg),
    }
}

/// Unit square, Dirichlet on the left and right edges, Neumann on top and
/// bottom. The upper half is split into `d` vertical strips whose
/// conductivities are the parameters; the lower half has conductivity one.
/// The load sits on the top row, the output is the trace on a centred
/// segment of `l` bottom-row nodes.
fn diffusion(cfg: &ProblemConfig) -> Result<FullOrderModel> {
    let g = Grid::for_size(cfg.n)?;
    let d = cfg.d;
    if d == 0 || d > g.nx {
        return Err(Error::Config(format!("need 1 <= d <= {} for this grid, got {d}", g.nx)));
    }
    if cfg.l > g.nx {
        return Err(Error::Config(format!(
            "output segment of {} nodes exceeds the bottom row ({} nodes)",
            cfg.l, g.nx
        )));
    }
    let hx = 1.0 / (g.nx + 1) as f64;
    let hy = 1.0 / g.ny as f64;
    let (wx, wy) = (1.0 / (hx * hx), 1.0 / (hy * hy));
    let region = |x: f64, y: f64| -> usize {
        if y <= 0.5 {
            0
        } else {
            1 + ((x * d as f64).floor() as usize).min(d - 1)
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut st = Stiffness::new(g.n(), d + 1);
    for iy in 0..g.ny {
        let y = (iy as f64 + 0.5) * hy;
        for ix in 0..g.nx {
            let p = g.idx(ix, iy);
            let x = (ix + 1) as f64 * hx;
            if ix == 0 {
                st.boundary(region(0.5 * hx, y), p, wx * heterogeneity(&mut rng));
            }
            if ix + 1 < g.nx {
                st.face(region(x + 0.5 * hx, y), p, g.idx(ix + 1, iy), wx * heterogeneity(&mut rng));
            } else {
                st.boundary(region(x + 0.5 * hx, y), p, wx * heterogeneity(&mut rng));
            }
            if iy + 1 < g.ny {
                st.face(region(x, y + 0.5 * hy), p, g.idx(ix, iy + 1), wy * heterogeneity(&mut rng));
            }
        }
    }
    let mats = st.finish()?;
    let terms: Vec<AffineTerm<CsrMatrix>> = mats
        .into_iter()
        .enumerate()
        .map(|(k, m)| {
            let c = if k == 0 { CoefficientFn::one() } else { CoefficientFn::component(k - 1, d) };
            AffineTerm::new(c, m)
        })
        .collect();
    let a = AffineForm::<CsrMatrix>::new(terms)?;
    let mut load = DVector::zeros(g.n());
    for ix in 0..g.nx {
        let x = (ix + 1) as f64 * hx;
        if (x - 0.5).abs() <= 0.25 {
            load[g.idx(ix, g.ny - 1)] = 1.0;
        }
    }
    let b = AffineForm::<DVector<f64>>::new(vec![AffineTerm::new(CoefficientFn::one(), load)])?;
    let start = (g.nx - cfg.l) / 2;
    let trace = CsrMatrix::from_triplets(cfg.l, g.n(), (0..cfg.l).map(|j| (j, g.idx(start + j, 0), 1.0)))?;
    let l = AffineForm::<CsrMatrix>::new(vec![AffineTerm::new(CoefficientFn::one(), trace)])?;
    let reference = vec![1.0; d];
    let r_v0 = a.assemble(&reference);
    let domain = ParameterDomain::new(vec![ParamRange::log(DIFFUSION_RANGE.0, DIFFUSION_RANGE.1); d])?;
    FullOrderModel::new(ModelParts {
        a,
        b,
        l,
        r_v0,
        r_z: None,
        domain,
        reference,
        symmetry: Symmetry::Spd,
        norm: None,
        coercive_affine: true,
    })
}

/// Unit square with homogeneous Dirichlet conditions. The first `d − 2`
/// parameters scale the conductivity of vertical strips in the middle band
/// `0.25 < y < 0.75`, the last two are the advection velocity components
/// (upwind differences). The source is one in the middle band; output `j`
/// is the mean over the `j`-th of `l` contiguous chunks of nodes.
fn advection_diffusion(cfg: &ProblemConfig) -> Result<FullOrderModel> {
    let g = Grid::for_size(cfg.n)?;
    let d = cfg.d;
    if d < 3 || d - 2 > g.nx {
        return Err(Error::Config(format!(
            "advection-diffusion needs 3 <= d <= {}, got {d}",
            g.nx + 2
        )));
    }
    let nd = d - 2;
    let hx = 1.0 / (g.nx + 1) as f64;
    let hy = 1.0 / (g.ny + 1) as f64;
    let (wx, wy) = (1.0 / (hx * hx), 1.0 / (hy * hy));
    let region = |x: f64, y: f64| -> usize {
        if y <= 0.25 || y >= 0.75 {
            0
        } else {
            1 + ((x * nd as f64).floor() as usize).min(nd - 1)
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut st = Stiffness::new(g.n(), nd + 1);
    let mut lap = Stiffness::new(g.n(), 1);
    let mut cx = Vec::new();
    let mut cy = Vec::new();
    for iy in 0..g.ny {
        let y = (iy + 1) as f64 * hy;
        for ix in 0..g.nx {
            let p = g.idx(ix, iy);
            let x = (ix + 1) as f64 * hx;
            if ix == 0 {
                st.boundary(region(0.5 * hx, y), p, wx * heterogeneity(&mut rng));
                lap.boundary(0, p, wx);
            }
            if ix + 1 < g.nx {
                let q = g.idx(ix + 1, iy);
                st.face(region(x + 0.5 * hx, y), p, q, wx * heterogeneity(&mut rng));
                lap.face(0, p, q, wx);
            } else {
                st.boundary(region(x + 0.5 * hx, y), p, wx * heterogeneity(&mut rng));
                lap.boundary(0, p, wx);
            }
            if iy == 0 {
                st.boundary(region(x, 0.5 * hy), p, wy * heterogeneity(&mut rng));
                lap.boundary(0, p, wy);
            }
            if iy + 1 < g.ny {
                let q = g.idx(ix, iy + 1);
                st.face(region(x, y + 0.5 * hy), p, q, wy * heterogeneity(&mut rng));
                lap.face(0, p, q, wy);
            } else {
                st.boundary(region(x, y + 0.5 * hy), p, wy * heterogeneity(&mut rng));
                lap.boundary(0, p, wy);
            }
            cx.push((p, p, 1.0 / hx));
            if ix > 0 {
                cx.push((p, g.idx(ix - 1, iy), -1.0 / hx));
            }
            cy.push((p, p, 1.0 / hy));
            if iy > 0 {
                cy.push((p, g.idx(ix, iy - 1), -1.0 / hy));
            }
        }
    }
    let mut terms: Vec<AffineTerm<CsrMatrix>> = st
        .finish()?
        .into_iter()
        .enumerate()
        .map(|(k, m)| {
            let c = if k == 0 { CoefficientFn::one() } else { CoefficientFn::component(k - 1, d) };
            AffineTerm::new(c, m)
        })
        .collect();
    terms.push(AffineTerm::new(
        CoefficientFn::component(d - 2, d),
        CsrMatrix::from_triplets(g.n(), g.n(), cx)?,
    ));
    terms.push(AffineTerm::new(
        CoefficientFn::component(d - 1, d),
        CsrMatrix::from_triplets(g.n(), g.n(), cy)?,
    ));
    let a = AffineForm::<CsrMatrix>::new(terms)?;
    let mut source = DVector::zeros(g.n());
    for iy in 0..g.ny {
        let y = (iy + 1) as f64 * hy;
        if y > 0.25 && y < 0.75 {
            for ix in 0..g.nx {
                source[g.idx(ix, iy)] = 1.0;
            }
        }
    }
    if source.iter().all(|v| *v == 0.0) {
        source[g.idx(g.nx / 2, g.ny / 2)] = 1.0;
    }
    let b = AffineForm::<DVector<f64>>::new(vec![AffineTerm::new(CoefficientFn::one(), source)])?;
    let n = g.n();
    let mut ltrips = Vec::with_capacity(n);
    for j in 0..cfg.l {
        let (lo, hi) = (j * n / cfg.l, (j + 1) * n / cfg.l);
        let w = 1.0 / (hi - lo) as f64;
        ltrips.extend((lo..hi).map(|p| (j, p, w)));
    }
    let l = AffineForm::<CsrMatrix>::new(vec![AffineTerm::new(
        CoefficientFn::one(),
        CsrMatrix::from_triplets(cfg.l, n, ltrips)?,
    )])?;
    let lap = lap.finish()?.pop().expect("one region");
    let r_v0 = CsrMatrix::linear_combination(&[(1.0, &lap), (1.0, &CsrMatrix::identity(n))])?;
    let mut comps = vec![ParamRange::log(DIFFUSION_RANGE.0, DIFFUSION_RANGE.1); nd];
    comps.push(ParamRange::linear(ADVECTION_RANGE.0, ADVECTION_RANGE.1));
    comps.push(ParamRange::linear(ADVECTION_RANGE.0, ADVECTION_RANGE.1));
    let mut reference = vec![1.0; nd];
    reference.extend([0.0, 0.0]);
    FullOrderModel::new(ModelParts {
        a,
        b,
        l,
        r_v0,
        r_z: None,
        domain: ParameterDomain::new(comps)?,
        reference,
        symmetry: Symmetry::General,
        norm: None,
        coercive_affine: false,
    })
}

/// `count` seeded draws, uniform per component in its own scale.
pub fn sample_parameters(domain: &ParameterDomain, count: usize, seed: u64) -> Vec<Vec<f64>> {
    domain.sample(count, seed)
}

/// Solves `A(ξ) u = b(ξ)`.
pub fn truth_solve(model: &FullOrderModel, xi: &[f64]) -> Result<DVector<f64>> {
    let f = model.factor_a(xi)?;
    Ok(f.solve(&model.assemble_b(xi)?))
}

/// Solves `A(ξ)ᵀ Q = L(ξ)ᵀ`, one column per output component.
pub fn dual_truth_solve(model: &FullOrderModel, xi: &[f64]) -> Result<DMatrix<f64>> {
    let f = model.factor_a(xi)?;
    let lt = model.assemble_l(xi)?.transpose().to_dense();
    Ok(f.solve_transpose_mat(&lt))
}

/// `s = L(ξ) u`.
pub fn output(model: &FullOrderModel, xi: &[f64], u: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(model.assemble_l(xi)?.mul_vec(u))
}

/// Truth output `s(ξ)`.
pub fn truth_output(model: &FullOrderModel, xi: &[f64]) -> Result<DVector<f64>> {
    let u = truth_solve(model, xi)?;
    output(model, xi, &u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: ProblemKind, n: usize, d: usize, l: usize) -> ProblemConfig {
        ProblemConfig { kind, n, d, l, seed: 7 }
    }

    #[test]
    fn grid_shape() {
        let g = Grid::for_size(50).unwrap();
        assert_eq!((g.ny, g.nx), (5, 10));
        assert!(Grid::for_size(17).is_err());
    }

    #[test]
    fn diffusion_is_spd_with_min_theta_structure() {
        let m = generate(&cfg(ProblemKind::Diffusion, 100, 3, 5)).unwrap();
        assert_eq!((m.n(), m.d(), m.l()), (100, 3, 5));
        for t in m.a_form().terms() {
            assert_eq!(t.value.asymmetry(), 0.0);
            let (vals, _) = crate::linalg::dense::sym_eig_sorted(&t.value.to_dense());
            assert!(vals[0] > -1e-9, "term is not SPSD");
        }
        let xi = vec![1.0; 3];
        let sum = m
            .a_form()
            .terms()
            .iter()
            .fold(CsrMatrix::zeros(100, 100), |acc, t| {
                CsrMatrix::linear_combination(&[(1.0, &acc), (1.0, &t.value)]).unwrap()
            });
        assert_eq!(m.assemble_a(&xi).unwrap().to_dense(), sum.to_dense());
    }

    #[test]
    fn single_parameter_assembly() {
        let m = generate(&cfg(ProblemKind::Diffusion, 36, 1, 2)).unwrap();
        let t = m.a_form().terms();
        let expect = t[0].value.to_dense() + t[1].value.to_dense();
        assert!((m.assemble_a(&[1.0]).unwrap().to_dense() - expect).norm() == 0.0);
    }

    #[test]
    fn advection_rows_and_symmetry() {
        let m = generate(&cfg(ProblemKind::AdvectionDiffusion, 64, 4, 3)).unwrap();
        let l = m.assemble_l(&[1.0, 1.0, 0.0, 0.0]).unwrap().to_dense();
        for r in 0..3 {
            assert!((l.row(r).sum() - 1.0).abs() < 1e-14);
        }
        assert!(m.assemble_a(&[1.0, 2.0, 0.0, 0.0]).unwrap().asymmetry() < 1e-15);
        assert!(m.assemble_a(&[1.0, 2.0, 10.0, 5.0]).unwrap().asymmetry() > 1e-3);
        let f = crate::linalg::BandLu::factor(&m.assemble_a(&[0.1, 10.0, 50.0, 50.0]).unwrap()).unwrap();
        assert!(f.min_pivot() > 1e-12);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(generate(&cfg(ProblemKind::Diffusion, 100, 3, 0)).is_err());
        assert!(generate(&cfg(ProblemKind::Diffusion, 100, 3, 11)).is_err());
        assert!(generate(&cfg(ProblemKind::AdvectionDiffusion, 100, 2, 1)).is_err());
    }

    #[test]
    fn generation_is_seeded() {
        let a = generate(&cfg(ProblemKind::Diffusion, 36, 2, 3)).unwrap();
        let b = generate(&cfg(ProblemKind::Diffusion, 36, 2, 3)).unwrap();
        assert_eq!(a.r_v0(), b.r_v0());
        let mut other = cfg(ProblemKind::Diffusion, 36, 2, 3);
        other.seed = 8;
        assert_ne!(generate(&other).unwrap().r_v0(), a.r_v0());
    }

    #[test]
    fn truth_solves_satisfy_the_equations() {
        for kind in [ProblemKind::Diffusion, ProblemKind::AdvectionDiffusion] {
            let m = generate(&cfg(kind, 49, 3, 2)).unwrap();
            let xi = m.domain().sample(1, 3).pop().unwrap();
            let u = truth_solve(&m, &xi).unwrap();
            let a = m.assemble_a(&xi).unwrap();
            let b = m.assemble_b(&xi).unwrap();
            assert!((a.mul_vec(&u) - &b).norm() <= 1e-10 * b.norm());
            let q = dual_truth_solve(&m, &xi).unwrap();
            let lt = m.assemble_l(&xi).unwrap().transpose().to_dense();
            assert!((a.transpose().to_dense() * &q - &lt).norm() <= 1e-10 * lt.norm());
        }
    }
}
