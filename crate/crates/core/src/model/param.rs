use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::num17;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

/// Range of a single parameter component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    #[serde(with = "num17")]
    pub lo: f64,
    #[serde(with = "num17")]
    pub hi: f64,
    pub scale: Scale,
}

impl ParamRange {
    pub fn log(lo: f64, hi: f64) -> Self {
        Self { lo, hi, scale: Scale::Log }
    }

    pub fn linear(lo: f64, hi: f64) -> Self {
        Self { lo, hi, scale: Scale::Linear }
    }

    fn slack(&self) -> f64 {
        1e-12 * self.lo.abs().max(self.hi.abs()).max(1.0)
    }

    /// Midpoint in the component's own scale.
    pub fn center(&self) -> f64 {
        match self.scale {
            Scale::Linear => 0.5 * (self.lo + self.hi),
            Scale::Log => (self.lo * self.hi).sqrt(),
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random();
        let v = match self.scale {
            Scale::Linear => self.lo + u * (self.hi - self.lo),
            Scale::Log => {
                let (a, b) = (self.lo.ln(), self.hi.ln());
                (a + u * (b - a)).exp()
            }
        };
        v.clamp(self.lo, self.hi)
    }
}

/// Box-shaped parameter domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    components: Vec<ParamRange>,
}

impl ParameterDomain {
    pub fn new(components: Vec<ParamRange>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("parameter domain needs at least one component".into()));
        }
        for (i, c) in components.iter().enumerate() {
            if !(c.lo.is_finite() && c.hi.is_finite() && c.lo < c.hi) {
                return Err(Error::Config(format!(
                    "component {i}: invalid range [{}, {}]",
                    c.lo, c.hi
                )));
            }
            if c.scale == Scale::Log && c.lo <= 0.0 {
                return Err(Error::Config(format!(
                    "component {i}: log scale needs a positive lower bound"
                )));
            }
        }
        Ok(Self { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ParamRange] {
        &self.components
    }

    pub fn contains(&self, xi: &[f64]) -> bool {
        self.check(xi).is_ok()
    }

    /// Rejects parameters of the wrong dimension or outside the box.
    pub fn check(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.dim() {
            return Err(Error::DomainViolation {
                xi: xi.to_vec(),
                reason: format!("expected {} components, got {}", self.dim(), xi.len()),
            });
        }
        for (i, (v, c)) in xi.iter().zip(&self.components).enumerate() {
            let s = c.slack();
            if !v.is_finite() || *v < c.lo - s || *v > c.hi + s {
                return Err(Error::DomainViolation {
                    xi: xi.to_vec(),
                    reason: format!("component {i} = {v} not in [{}, {}]", c.lo, c.hi),
                });
            }
        }
        Ok(())
    }

    pub fn center(&self) -> Vec<f64> {
        self.components.iter().map(ParamRange::center).collect()
    }

    /// `count` independent draws, uniform per component in its own scale.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| self.components.iter().map(|c| c.draw(&mut rng)).collect())
            .collect()
    }
}

/// Scalar coefficient `θ(ξ)` of an affine term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CoefficientFn {
    Constant {
        #[serde(with = "num17")]
        value: f64,
    },
    /// `scale · Π ξ_i^{e_i}`.
    Monomial {
        #[serde(with = "num17")]
        scale: f64,
        exponents: Vec<i32>,
    },
}

impl CoefficientFn {
    pub fn one() -> Self {
        CoefficientFn::Constant { value: 1.0 }
    }

    /// The coordinate function `ξ_i` in a domain of dimension `d`.
    pub fn component(i: usize, d: usize) -> Self {
        let mut exponents = vec![0; d];
        exponents[i] = 1;
        CoefficientFn::Monomial { scale: 1.0, exponents }
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        match self {
            CoefficientFn::Constant { value } => *value,
            CoefficientFn::Monomial { scale, exponents } => exponents
                .iter()
                .zip(xi)
                .fold(*scale, |acc, (&e, &x)| if e == 0 { acc } else { acc * x.powi(e) }),
        }
    }

    /// Number of parameter components the function reads.
    pub fn arity(&self) -> usize {
        match self {
            CoefficientFn::Constant { .. } => 0,
            CoefficientFn::Monomial { exponents, .. } => exponents.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dom() -> ParameterDomain {
        ParameterDomain::new(vec![ParamRange::log(0.1, 10.0), ParamRange::linear(-1.0, 2.0)]).unwrap()
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(ParameterDomain::new(vec![]).is_err());
        assert!(ParameterDomain::new(vec![ParamRange::log(0.0, 1.0)]).is_err());
        assert!(ParameterDomain::new(vec![ParamRange::linear(2.0, 1.0)]).is_err());
    }

    #[test]
    fn check_reports_violations() {
        let d = dom();
        assert!(d.check(&[1.0, 0.0]).is_ok());
        assert!(matches!(d.check(&[11.0, 0.0]), Err(Error::DomainViolation { .. })));
        assert!(matches!(d.check(&[1.0]), Err(Error::DomainViolation { .. })));
    }

    #[test]
    fn sampling_is_seeded() {
        let d = dom();
        assert_eq!(d.sample(5, 3), d.sample(5, 3));
        assert_ne!(d.sample(5, 3), d.sample(5, 4));
    }

    #[test]
    fn monomial_eval() {
        let f = CoefficientFn::Monomial { scale: 2.0, exponents: vec![1, 2] };
        assert_eq!(f.eval(&[3.0, 0.5]), 1.5);
        assert_eq!(CoefficientFn::component(1, 2).eval(&[3.0, 0.5]), 0.5);
    }

    #[test]
    fn coefficient_json_roundtrip() {
        let f = CoefficientFn::Monomial { scale: 0.1, exponents: vec![0, 1] };
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("1.0000000000000001e-1"));
        let back: CoefficientFn = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }

    proptest! {
        #[test]
        fn samples_stay_inside(seed in 0u64..1000, count in 1usize..20) {
            let d = dom();
            for xi in d.sample(count, seed) {
                prop_assert!(d.contains(&xi));
            }
        }
    }
}
