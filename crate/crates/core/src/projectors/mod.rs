//! Reduced solves: Galerkin / Petrov–Galerkin primal, dual-only, primal-dual
//! and saddle-point projections.

pub mod explicit;
mod online;

use serde::{Deserialize, Serialize};

pub use online::{OnlineSolution, ReducedModel};

use crate::error::Error;

/// Constant `C` in the online cost model `C · size³`.
pub const COST_CONSTANT: f64 = 2.0 / 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Primal,
    Dual,
    PrimalDual,
    Saddle,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Primal, Method::Dual, Method::PrimalDual, Method::Saddle];

    pub fn name(self) -> &'static str {
        match self {
            Method::Primal => "primal",
            Method::Dual => "dual",
            Method::PrimalDual => "primal-dual",
            Method::Saddle => "saddle",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}
