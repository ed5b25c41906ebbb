//! Expected flow vectors for the three singly-constrained interaction models.
//!
//! Each family reduces to a vector of log-weights over destinations which is
//! pushed through a max-shifted softmax and scaled by the observed outflow,
//! so every prediction satisfies the origin outflow constraint by
//! construction. The same log-weights, with their Jacobian, feed the
//! analytic gradients used during calibration.

mod gravity;
mod radiation;
mod retail;

pub use gravity::gravity_flows;
pub use radiation::{intervening_population, radiation_flows, radiation_probability};
pub use retail::retail_flows;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Covariate, Family, ParameterVector, TerritorySystem};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("weight for destination {destination} is not finite")]
    NonFiniteWeight { destination: String },
    #[error("all destination weights vanish")]
    DegenerateDenominator,
    #[error("no covariates for year {year}")]
    MissingCovariates { year: i32 },
    #[error("covariate {covariate} of {territory} is not strictly positive")]
    NonPositiveCovariate { territory: String, covariate: Covariate },
    #[error("parameter {name} = {value} is outside its domain")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("invalid territory pair ({origin}, {destination})")]
    InvalidPair { origin: usize, destination: usize },
    #[error("system has no destinations")]
    NoDestinations,
}

/// Modelled flows from the origin, aligned with
/// [`TerritorySystem::destinations`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPrediction {
    pub year: i32,
    pub family: Family,
    pub values: Vec<f64>,
}

impl FlowPrediction {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Per-destination log-weights and their derivatives with respect to the
/// natural parameters, row `j` holding `d u_j / d theta`.
#[derive(Debug, Clone)]
pub(crate) struct LogWeights {
    pub values: Vec<f64>,
    pub jacobian: Vec<Vec<f64>>,
}

/// Predicts the flow vector for any family.
///
/// `year` selects the covariate set for the retail model and labels the
/// prediction for the others.
pub fn predict(
    params: &ParameterVector,
    system: &TerritorySystem,
    year: i32,
    total_outflow: f64,
) -> Result<FlowPrediction, ModelError> {
    match params {
        ParameterVector::Gravity { b, c } => gravity_flows(*b, *c, system, year, total_outflow),
        ParameterVector::Radiation { rho, r } => radiation_flows(*rho, *r, system, year, total_outflow),
        ParameterVector::Retail { beta, alphas } => retail_flows(*beta, alphas, system, year, total_outflow),
    }
}

pub(crate) fn log_weights(
    params: &ParameterVector,
    system: &TerritorySystem,
    year: i32,
) -> Result<LogWeights, ModelError> {
    match params {
        ParameterVector::Gravity { b, c } => gravity::log_weights(*b, *c, system),
        ParameterVector::Radiation { rho, r } => radiation::log_weights(*rho, *r, system),
        ParameterVector::Retail { beta, alphas } => retail::log_weights(*beta, alphas, system, year),
    }
}

/// Shares `total` over destinations in proportion to `exp(u_j)`.
pub(crate) fn softmax_scaled(
    log_weights: &[f64],
    total: f64,
    system: &TerritorySystem,
) -> Result<Vec<f64>, ModelError> {
    if log_weights.is_empty() {
        return Err(ModelError::NoDestinations);
    }
    let dests = system.destinations();
    for (u, &d) in log_weights.iter().zip(&dests) {
        if u.is_nan() || *u == f64::INFINITY {
            return Err(ModelError::NonFiniteWeight { destination: system.territories[d].code.clone() });
        }
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(ModelError::DegenerateDenominator);
    }
    let weights: Vec<f64> = log_weights.iter().map(|u| (u - max).exp()).collect();
    let sum: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| total * w / sum).collect())
}
