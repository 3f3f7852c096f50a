//! Affine full-order models: parameter domains, affine forms, norms and bundle I/O.

pub mod affine;
pub mod bundle;
pub mod fom;
pub mod mtx;
pub mod param;

pub use affine::{AffineForm, AffineTerm};
pub use fom::{FullOrderModel, ModelParts, NormKind, OperatorFactor, RieszMap, Symmetry, VMetric};
pub use param::{CoefficientFn, ParamRange, ParameterDomain, Scale};

/// Serde helpers writing floats with 17 significant digits.
pub(crate) mod num17 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use serde_json::value::RawValue;

    pub(crate) fn text(v: f64) -> Option<String> {
        v.is_finite().then(|| format!("{v:.16e}"))
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        let t = text(*v).ok_or_else(|| serde::ser::Error::custom("non-finite number"))?;
        RawValue::from_string(t)
            .map_err(serde::ser::Error::custom)?
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut parts = Vec::with_capacity(v.len());
            for x in v {
                parts.push(text(*x).ok_or_else(|| serde::ser::Error::custom("non-finite number"))?);
            }
            RawValue::from_string(format!("[{}]", parts.join(",")))
                .map_err(serde::ser::Error::custom)?
                .serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<f64>::deserialize(d)
        }
    }

    pub mod vecvec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
            let mut rows = Vec::with_capacity(v.len());
            for row in v {
                let mut parts = Vec::with_capacity(row.len());
                for x in row {
                    parts.push(text(*x).ok_or_else(|| serde::ser::Error::custom("non-finite number"))?);
                }
                rows.push(format!("[{}]", parts.join(",")));
            }
            RawValue::from_string(format!("[{}]", rows.join(",")))
                .map_err(serde::ser::Error::custom)?
                .serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
            Vec::<Vec<f64>>::deserialize(d)
        }
    }
}
