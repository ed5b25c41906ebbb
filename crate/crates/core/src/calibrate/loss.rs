//! Loss functions, their gradients with respect to predicted flows, and the
//! log-likelihoods used for information criteria.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::domain::{FlowObservation, Loss};
use crate::models::FlowPrediction;

/// Floor applied to predictions inside the Poisson loss.
pub const PREDICTION_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("prediction has {prediction} destinations, observation has {observation}")]
    LengthMismatch { prediction: usize, observation: usize },
    #[error("prediction {value} at destination {index} is not positive while its count is {count}")]
    NonPositivePrediction { index: usize, value: f64, count: f64 },
    #[error("residual variance is zero")]
    DegenerateVariance,
    #[error("no destinations")]
    Empty,
}

/// A loss split into its data term and L2 penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub data_term: f64,
    pub penalty: f64,
    pub total: f64,
    pub lambda: f64,
}

impl LossValue {
    pub fn new(data_term: f64, params: &[f64], lambda: f64) -> Self {
        let penalty = l2_penalty(params, lambda);
        LossValue { data_term, penalty, total: data_term + penalty, lambda }
    }
}

pub fn l2_penalty(params: &[f64], lambda: f64) -> f64 {
    lambda * params.iter().map(|p| p * p).sum::<f64>()
}

fn check_lengths(prediction: &[f64], observation: &[f64]) -> Result<(), LossError> {
    if prediction.len() != observation.len() {
        return Err(LossError::LengthMismatch { prediction: prediction.len(), observation: observation.len() });
    }
    if prediction.is_empty() {
        return Err(LossError::Empty);
    }
    Ok(())
}

/// `(1/2N) sum_j (data_j - model_j)^2 + lambda |theta|^2`.
pub fn gaussian_loss(
    prediction: &FlowPrediction,
    observation: &FlowObservation,
    params: &[f64],
    lambda: f64,
) -> Result<LossValue, LossError> {
    Ok(LossValue::new(gaussian_data_term(&prediction.values, &observation.counts)?, params, lambda))
}

/// `(1/N) sum_j (model_j - data_j ln model_j) + lambda |theta|^2`.
pub fn poisson_loss(
    prediction: &FlowPrediction,
    observation: &FlowObservation,
    params: &[f64],
    lambda: f64,
) -> Result<LossValue, LossError> {
    Ok(LossValue::new(poisson_data_term(&prediction.values, &observation.counts)?, params, lambda))
}

pub fn loss_value(
    loss: Loss,
    prediction: &FlowPrediction,
    observation: &FlowObservation,
    params: &[f64],
    lambda: f64,
) -> Result<LossValue, LossError> {
    match loss {
        Loss::Gaussian => gaussian_loss(prediction, observation, params, lambda),
        Loss::Poisson => poisson_loss(prediction, observation, params, lambda),
    }
}

pub(crate) fn gaussian_data_term(model: &[f64], data: &[f64]) -> Result<f64, LossError> {
    check_lengths(model, data)?;
    let n = data.len() as f64;
    Ok(model.iter().zip(data).map(|(m, d)| (d - m) * (d - m)).sum::<f64>() / (2.0 * n))
}

pub(crate) fn poisson_data_term(model: &[f64], data: &[f64]) -> Result<f64, LossError> {
    check_lengths(model, data)?;
    let n = data.len() as f64;
    let mut sum = 0.0;
    for (index, (&m, &d)) in model.iter().zip(data).enumerate() {
        if m <= PREDICTION_FLOOR {
            if d > 0.0 || m.is_nan() {
                return Err(LossError::NonPositivePrediction { index, value: m, count: d });
            }
            sum += PREDICTION_FLOOR;
        } else {
            sum += m - d * m.ln();
        }
    }
    Ok(sum / n)
}

/// Derivative of the data term with respect to each predicted flow.
pub(crate) fn data_term_gradient(loss: Loss, model: &[f64], data: &[f64]) -> Vec<f64> {
    let n = data.len() as f64;
    model
        .iter()
        .zip(data)
        .map(|(&m, &d)| match loss {
            Loss::Gaussian => (m - d) / n,
            Loss::Poisson if m > PREDICTION_FLOOR => (1.0 - d / m) / n,
            Loss::Poisson => 0.0,
        })
        .collect()
}

/// Maximized log-likelihood of the observation under the prediction.
///
/// Poisson counts are independent given the model, with `ln(d!)` from the
/// log-gamma function. The Gaussian case profiles out the variance with
/// `sigma^2 = mean squared residual`, giving `-(N/2)(ln(2 pi sigma^2) + 1)`.
pub fn log_likelihood(
    loss: Loss,
    prediction: &FlowPrediction,
    observation: &FlowObservation,
) -> Result<f64, LossError> {
    log_likelihood_raw(loss, &prediction.values, &observation.counts)
}

pub(crate) fn log_likelihood_raw(loss: Loss, model: &[f64], data: &[f64]) -> Result<f64, LossError> {
    check_lengths(model, data)?;
    match loss {
        Loss::Poisson => {
            let mut ll = 0.0;
            for (index, (&m, &d)) in model.iter().zip(data).enumerate() {
                if m <= PREDICTION_FLOOR && d > 0.0 || m.is_nan() {
                    return Err(LossError::NonPositivePrediction { index, value: m, count: d });
                }
                let fit = if d > 0.0 { d * m.ln() } else { 0.0 };
                ll += fit - m - ln_gamma(d + 1.0);
            }
            Ok(ll)
        }
        Loss::Gaussian => {
            let n = data.len() as f64;
            let sigma2 = model.iter().zip(data).map(|(m, d)| (d - m) * (d - m)).sum::<f64>() / n;
            if !(sigma2 > 0.0) {
                return Err(LossError::DegenerateVariance);
            }
            Ok(-0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0))
        }
    }
}
