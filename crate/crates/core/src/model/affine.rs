use nalgebra::DVector;

use super::param::CoefficientFn;
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

#[derive(Clone, Debug)]
pub struct AffineTerm<T> {
    pub coefficient: CoefficientFn,
    pub value: T,
}

impl<T> AffineTerm<T> {
    pub fn new(coefficient: CoefficientFn, value: T) -> Self {
        Self { coefficient, value }
    }
}

/// `Σ_a θ_a(ξ) T_a` with a nonempty list of terms.
#[derive(Clone, Debug)]
pub struct AffineForm<T> {
    terms: Vec<AffineTerm<T>>,
}

impl<T> AffineForm<T> {
    pub fn terms(&self) -> &[AffineTerm<T>] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficients(&self, xi: &[f64]) -> Vec<f64> {
        self.terms.iter().map(|t| t.coefficient.eval(xi)).collect()
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.terms.iter().map(|t| &t.value)
    }

    fn check_nonempty(terms: &[AffineTerm<T>], what: &str) -> Result<()> {
        if terms.is_empty() {
            return Err(Error::Config(format!("{what}: affine form without terms")));
        }
        Ok(())
    }
}

impl AffineForm<CsrMatrix> {
    pub fn new(terms: Vec<AffineTerm<CsrMatrix>>) -> Result<Self> {
        Self::check_nonempty(&terms, "matrix form")?;
        let shape = terms[0].value.shape();
        if let Some(t) = terms.iter().find(|t| t.value.shape() != shape) {
            return Err(Error::Shape(format!(
                "affine terms of shapes {:?} and {:?}",
                shape,
                t.value.shape()
            )));
        }
        Ok(Self { terms })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.terms[0].value.shape()
    }

    pub fn assemble(&self, xi: &[f64]) -> CsrMatrix {
        let coefs = self.coefficients(xi);
        let parts: Vec<(f64, &CsrMatrix)> = coefs.iter().copied().zip(self.values()).collect();
        CsrMatrix::linear_combination(&parts).expect("shapes were validated")
    }
}

impl AffineForm<DVector<f64>> {
    pub fn new(terms: Vec<AffineTerm<DVector<f64>>>) -> Result<Self> {
        Self::check_nonempty(&terms, "vector form")?;
        let n = terms[0].value.len();
        if terms.iter().any(|t| t.value.len() != n) {
            return Err(Error::Shape("affine vector terms of different lengths".into()));
        }
        Ok(Self { terms })
    }

    pub fn dim(&self) -> usize {
        self.terms[0].value.len()
    }

    pub fn assemble(&self, xi: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for (c, t) in self.coefficients(xi).into_iter().zip(&self.terms) {
            out.axpy(c, &t.value, 1.0);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_forms_are_rejected() {
        assert!(AffineForm::<CsrMatrix>::new(vec![]).is_err());
        assert!(AffineForm::<DVector<f64>>::new(vec![]).is_err());
    }

    #[test]
    fn assembly_is_linear_in_coefficients() {
        let a0 = CsrMatrix::identity(2);
        let a1 = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0)]).unwrap();
        let f = AffineForm::<CsrMatrix>::new(vec![
            AffineTerm::new(CoefficientFn::one(), a0),
            AffineTerm::new(CoefficientFn::component(0, 1), a1),
        ])
        .unwrap();
        let m = f.assemble(&[3.0]).to_dense();
        assert_eq!(m[(0, 1)], 3.0);
        assert_eq!(m[(1, 1)], 1.0);
        let g = AffineForm::<DVector<f64>>::new(vec![
            AffineTerm::new(CoefficientFn::component(0, 1), DVector::from_vec(vec![1.0, 2.0])),
            AffineTerm::new(CoefficientFn::one(), DVector::from_vec(vec![1.0, 0.0])),
        ])
        .unwrap();
        assert_eq!(g.assemble(&[2.0]), DVector::from_vec(vec![3.0, 4.0]));
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let r = AffineForm::<CsrMatrix>::new(vec![
            AffineTerm::new(CoefficientFn::one(), CsrMatrix::identity(2)),
            AffineTerm::new(CoefficientFn::one(), CsrMatrix::identity(3)),
        ]);
        assert!(matches!(r, Err(Error::Shape(_))));
    }
}
