use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::affine::AffineForm;
use super::param::ParameterDomain;
use crate::error::{Error, Result};
use crate::linalg::dense::cholesky_lower;
use crate::linalg::{BandCholesky, BandLu, CsrMatrix};

/// Symmetry class of the operator family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Spd,
    General,
}

/// Inner product used for the solution space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// `R_V = A(ξ)`, only for symmetric positive definite families.
    Energy,
    /// `R_V = R_V0`.
    Reference,
}

/// Tolerance on `‖A − Aᵀ‖_F / ‖A‖_F` accepted for symmetric families.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Riesz map of a fixed SPD Gram matrix.
#[derive(Clone, Debug)]
pub struct RieszMap {
    matrix: Arc<CsrMatrix>,
    chol: BandCholesky,
}

impl RieszMap {
    pub fn new(matrix: Arc<CsrMatrix>, what: &str) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Shape(format!("{what} is not square")));
        }
        if matrix.asymmetry() > SYMMETRY_TOL {
            return Err(Error::NotSpd(format!("{what} is not symmetric")));
        }
        let chol = BandCholesky::factor(&matrix)
            .map_err(|e| Error::NotSpd(format!("{what}: {e}")))?;
        Ok(Self { matrix, chol })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn matrix_arc(&self) -> Arc<CsrMatrix> {
        self.matrix.clone()
    }

    pub fn factor(&self) -> &BandCholesky {
        &self.chol
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.matrix.mul_vec(x)
    }

    pub fn norm_sq(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.matrix.mul_vec(x)).max(0.0)
    }

    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.norm_sq(x).sqrt()
    }

    pub fn apply_inverse(&self, r: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(r)
    }

    pub fn apply_inverse_mat(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve_mat(r)
    }

    /// `‖r‖²_{G⁻¹}`, evaluated as `‖C⁻¹ r‖²` for `G = C Cᵀ`.
    pub fn dual_norm_sq(&self, r: &DVector<f64>) -> f64 {
        self.chol.whiten(r).norm_squared()
    }

    pub fn dual_norm(&self, r: &DVector<f64>) -> f64 {
        self.dual_norm_sq(r).sqrt()
    }

    pub fn whiten(&self, r: &DVector<f64>) -> DVector<f64> {
        self.chol.whiten(r)
    }

    pub fn whiten_mat(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.whiten_mat(r)
    }
}

/// Factorization of an assembled operator: Cholesky for SPD families, LU otherwise.
#[derive(Clone, Debug)]
pub enum OperatorFactor {
    Cholesky(BandCholesky),
    Lu(BandLu),
}

impl OperatorFactor {
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            OperatorFactor::Cholesky(c) => c.solve(b),
            OperatorFactor::Lu(l) => l.solve(b),
        }
    }

    pub fn solve_transpose(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            OperatorFactor::Cholesky(c) => c.solve(b),
            OperatorFactor::Lu(l) => l.solve_transpose(b),
        }
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            OperatorFactor::Cholesky(c) => c.solve_mat(b),
            OperatorFactor::Lu(l) => l.solve_mat(b),
        }
    }

    pub fn solve_transpose_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            OperatorFactor::Cholesky(c) => c.solve_mat(b),
            OperatorFactor::Lu(l) => l.solve_transpose_mat(b),
        }
    }

    pub fn memory_bytes(&self) -> usize {
        match self {
            OperatorFactor::Cholesky(c) => c.memory_bytes(),
            OperatorFactor::Lu(l) => l.memory_bytes(),
        }
    }
}

/// Everything needed to build a [`FullOrderModel`].
#[derive(Clone, Debug)]
pub struct ModelParts {
    pub a: AffineForm<CsrMatrix>,
    pub b: AffineForm<DVector<f64>>,
    pub l: AffineForm<CsrMatrix>,
    pub r_v0: CsrMatrix,
    /// Defaults to the identity.
    pub r_z: Option<CsrMatrix>,
    pub domain: ParameterDomain,
    pub reference: Vec<f64>,
    pub symmetry: Symmetry,
    /// Defaults to energy for SPD families and reference otherwise.
    pub norm: Option<NormKind>,
    /// Every `A_a` is SPSD and every `θ_a` is positive on the domain.
    pub coercive_affine: bool,
}

/// Affine parameter-dependent linear system `A(ξ) u = b(ξ)`, `s = L(ξ) u`.
#[derive(Clone, Debug)]
pub struct FullOrderModel {
    a: AffineForm<CsrMatrix>,
    b: AffineForm<DVector<f64>>,
    l: AffineForm<CsrMatrix>,
    v0: RieszMap,
    r_z: CsrMatrix,
    r_z_dense: DMatrix<f64>,
    r_z_chol: DMatrix<f64>,
    domain: ParameterDomain,
    reference: Vec<f64>,
    symmetry: Symmetry,
    norm: NormKind,
    coercive_affine: bool,
}

impl FullOrderModel {
    pub fn new(parts: ModelParts) -> Result<Self> {
        let ModelParts {
            a,
            b,
            l,
            r_v0,
            r_z,
            domain,
            reference,
            symmetry,
            norm,
            coercive_affine,
        } = parts;
        let (n, m) = a.shape();
        if n != m {
            return Err(Error::Shape(format!("operator is {n}x{m}")));
        }
        if b.dim() != n {
            return Err(Error::Shape(format!("rhs has length {}, expected {n}", b.dim())));
        }
        let (nl, ln) = l.shape();
        if ln != n || nl == 0 {
            return Err(Error::Shape(format!("output is {nl}x{ln}, expected lx{n}")));
        }
        if r_v0.shape() != (n, n) {
            return Err(Error::Shape(format!("R_V0 is {:?}, expected {n}x{n}", r_v0.shape())));
        }
        let r_z = r_z.unwrap_or_else(|| CsrMatrix::identity(nl));
        if r_z.shape() != (nl, nl) {
            return Err(Error::Shape(format!("R_Z is {:?}, expected {nl}x{nl}", r_z.shape())));
        }
        let d = domain.dim();
        let arity = a
            .terms()
            .iter()
            .map(|t| t.coefficient.arity())
            .chain(b.terms().iter().map(|t| t.coefficient.arity()))
            .chain(l.terms().iter().map(|t| t.coefficient.arity()))
            .max()
            .unwrap_or(0);
        if arity > d {
            return Err(Error::Config(format!(
                "coefficient functions read {arity} components of a {d}-dimensional domain"
            )));
        }
        domain.check(&reference)?;
        let v0 = RieszMap::new(Arc::new(r_v0), "R_V0")?;
        if r_z.asymmetry() > SYMMETRY_TOL {
            return Err(Error::NotSpd("R_Z is not symmetric".into()));
        }
        let r_z_dense = r_z.to_dense();
        let r_z_chol = cholesky_lower(&r_z_dense, "R_Z")?;
        let norm = norm.unwrap_or(match symmetry {
            Symmetry::Spd => NormKind::Energy,
            Symmetry::General => NormKind::Reference,
        });
        if norm == NormKind::Energy && symmetry != Symmetry::Spd {
            return Err(Error::Config("energy norm requires an SPD family".into()));
        }
        if coercive_affine && symmetry != Symmetry::Spd {
            return Err(Error::Config("coercive-affine flag requires an SPD family".into()));
        }
        let model = Self {
            a,
            b,
            l,
            v0,
            r_z,
            r_z_dense,
            r_z_chol,
            domain,
            reference,
            symmetry,
            norm,
            coercive_affine,
        };
        if symmetry == Symmetry::Spd {
            model.verify_symmetric()?;
        }
        Ok(model)
    }

    fn verify_symmetric(&self) -> Result<()> {
        let mut points = vec![self.reference.clone()];
        points.extend(self.domain.sample(4, 0x5eed));
        for xi in points {
            let asym = self.a.assemble(&xi).asymmetry();
            if asym > SYMMETRY_TOL {
                return Err(Error::NotSpd(format!(
                    "operator asymmetry {asym:.3e} at {xi:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.a.shape().0
    }

    pub fn l(&self) -> usize {
        self.l.shape().0
    }

    pub fn d(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm
    }

    pub fn is_coercive_affine(&self) -> bool {
        self.coercive_affine
    }

    pub fn a_form(&self) -> &AffineForm<CsrMatrix> {
        &self.a
    }

    pub fn b_form(&self) -> &AffineForm<DVector<f64>> {
        &self.b
    }

    pub fn l_form(&self) -> &AffineForm<CsrMatrix> {
        &self.l
    }

    pub fn r_v0(&self) -> &CsrMatrix {
        self.v0.matrix()
    }

    pub fn v0(&self) -> &RieszMap {
        &self.v0
    }

    pub fn r_z(&self) -> &CsrMatrix {
        &self.r_z
    }

    pub fn r_z_dense(&self) -> &DMatrix<f64> {
        &self.r_z_dense
    }

    /// Lower factor `C_z` with `R_Z = C_z C_zᵀ`.
    pub fn r_z_factor(&self) -> &DMatrix<f64> {
        &self.r_z_chol
    }

    pub fn check_param(&self, xi: &[f64]) -> Result<()> {
        self.domain.check(xi)
    }

    pub fn assemble_a(&self, xi: &[f64]) -> Result<CsrMatrix> {
        self.check_param(xi)?;
        Ok(self.a.assemble(xi))
    }

    pub fn assemble_b(&self, xi: &[f64]) -> Result<DVector<f64>> {
        self.check_param(xi)?;
        Ok(self.b.assemble(xi))
    }

    pub fn assemble_l(&self, xi: &[f64]) -> Result<CsrMatrix> {
        self.check_param(xi)?;
        Ok(self.l.assemble(xi))
    }

    /// Factors `A(ξ)` with the method matching the symmetry class.
    pub fn factor_a(&self, xi: &[f64]) -> Result<OperatorFactor> {
        let a = self.assemble_a(xi)?;
        self.factor_assembled(&a)
    }

    pub fn factor_assembled(&self, a: &CsrMatrix) -> Result<OperatorFactor> {
        match self.symmetry {
            Symmetry::Spd => BandCholesky::factor(a).map(OperatorFactor::Cholesky),
            Symmetry::General => BandLu::factor(a).map(OperatorFactor::Lu),
        }
    }

    /// `‖e‖_Z = sqrt(eᵀ R_Z e)`.
    pub fn z_norm(&self, e: &DVector<f64>) -> f64 {
        e.dot(&(&self.r_z_dense * e)).max(0.0).sqrt()
    }

    /// Same model with the output replaced by `bᵀ`, which makes an SPD problem compliant.
    pub fn with_compliant_output(&self) -> Result<Self> {
        let terms = self
            .b
            .terms()
            .iter()
            .map(|t| {
                let row = CsrMatrix::from_dense(&DMatrix::from_row_slice(1, t.value.len(), t.value.as_slice()));
                super::affine::AffineTerm::new(t.coefficient.clone(), row)
            })
            .collect();
        Self::new(ModelParts {
            a: self.a.clone(),
            b: self.b.clone(),
            l: AffineForm::<CsrMatrix>::new(terms)?,
            r_v0: self.r_v0().clone(),
            r_z: None,
            domain: self.domain.clone(),
            reference: self.reference.clone(),
            symmetry: self.symmetry,
            norm: Some(self.norm),
            coercive_affine: self.coercive_affine,
        })
    }

    /// Copy of the model with another solution-space norm.
    pub fn with_norm(&self, norm: NormKind) -> Result<Self> {
        if norm == NormKind::Energy && self.symmetry != Symmetry::Spd {
            return Err(Error::Config("energy norm requires an SPD family".into()));
        }
        let mut out = self.clone();
        out.norm = norm;
        Ok(out)
    }
}

/// Solution-space inner product `R_V` frozen at one parameter value.
pub enum VMetric<'a> {
    Energy { a: CsrMatrix, chol: BandCholesky },
    Reference(&'a RieszMap),
}

impl<'a> VMetric<'a> {
    /// In energy mode this factors `A(ξ)` once.
    pub fn new(model: &'a FullOrderModel, xi: &[f64]) -> Result<Self> {
        match model.norm_kind() {
            NormKind::Reference => {
                model.check_param(xi)?;
                Ok(VMetric::Reference(model.v0()))
            }
            NormKind::Energy => {
                let a = model.assemble_a(xi)?;
                let chol = BandCholesky::factor(&a)?;
                Ok(VMetric::Energy { a, chol })
            }
        }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        match self {
            VMetric::Energy { a, .. } => a,
            VMetric::Reference(r) => r.matrix(),
        }
    }

    pub fn factor(&self) -> &BandCholesky {
        match self {
            VMetric::Energy { chol, .. } => chol,
            VMetric::Reference(r) => r.factor(),
        }
    }

    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&self.matrix().mul_vec(y))
    }

    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.matrix().mul_vec(x)
    }

    pub fn apply_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.matrix().mul_dense(x)
    }

    pub fn apply_inverse(&self, r: &DVector<f64>) -> DVector<f64> {
        self.factor().solve(r)
    }

    pub fn apply_inverse_mat(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor().solve_mat(r)
    }

    /// Coordinates in which the metric is Euclidean: `Cᵀ x` for `R_V = C Cᵀ`.
    pub fn lift_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor().lift_mat(x)
    }

    /// Dual-space vectors mapped to Euclidean coordinates: `C⁻¹ r`.
    pub fn whiten_mat(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor().whiten_mat(r)
    }

    pub fn dual_norm(&self, r: &DVector<f64>) -> f64 {
        self.factor().whiten(r).norm()
    }
}
