use serde::{Deserialize, Serialize};

use crate::domain::{FlowObservation, TerritorySystem};
use crate::models::FlowPrediction;

use super::SelectError;

fn aligned(observation: &FlowObservation, prediction: &FlowPrediction) -> Result<(), SelectError> {
    if observation.counts.len() != prediction.values.len() {
        return Err(SelectError::LengthMismatch {
            observation: observation.counts.len(),
            prediction: prediction.values.len(),
        });
    }
    Ok(())
}

/// Sørensen-Dice overlap `2 sum min(d, m) / (sum d + sum m)`.
pub fn sorensen_dice(observation: &FlowObservation, prediction: &FlowPrediction) -> Result<f64, SelectError> {
    aligned(observation, prediction)?;
    sorensen_dice_raw(&observation.counts, &prediction.values)
}

pub(crate) fn sorensen_dice_raw(a: &[f64], b: &[f64]) -> Result<f64, SelectError> {
    let overlap: f64 = a.iter().zip(b).map(|(x, y)| x.min(*y)).sum();
    let total: f64 = a.iter().sum::<f64>() + b.iter().sum::<f64>();
    if total == 0.0 {
        return Err(SelectError::BothEmpty);
    }
    Ok(2.0 * overlap / total)
}

/// Information criterion `2 ln M - 2 ln L`, with the sample size in place of
/// the usual parameter count.
pub fn bic(sample_size: usize, log_likelihood: f64) -> f64 {
    2.0 * (sample_size as f64).ln() - 2.0 * log_likelihood
}

/// Textbook Schwarz criterion `k ln M - 2 ln L`, reported alongside [`bic`].
pub fn bic_textbook(param_count: usize, sample_size: usize, log_likelihood: f64) -> f64 {
    param_count as f64 * (sample_size as f64).ln() - 2.0 * log_likelihood
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogMse {
    pub value: f64,
    pub included: usize,
    /// Destinations left out because their observed count is zero.
    pub excluded: usize,
}

/// Mean squared difference of natural logs over destinations with a
/// positive observed count.
pub fn log_mse(observation: &FlowObservation, prediction: &FlowPrediction) -> Result<LogMse, SelectError> {
    aligned(observation, prediction)?;
    log_mse_raw(&observation.counts, &prediction.values)
}

pub(crate) fn log_mse_raw(data: &[f64], model: &[f64]) -> Result<LogMse, SelectError> {
    let mut sum = 0.0;
    let mut included = 0;
    let mut excluded = 0;
    for (index, (&d, &m)) in data.iter().zip(model).enumerate() {
        if d <= 0.0 {
            excluded += 1;
            continue;
        }
        if !(m > 0.0) {
            return Err(SelectError::NonPositivePrediction { index, value: m });
        }
        let r = d.ln() - m.ln();
        sum += r * r;
        included += 1;
    }
    if included == 0 {
        return Err(SelectError::EmptyObservation);
    }
    Ok(LogMse { value: sum / included as f64, included, excluded })
}

/// Fraction of the observed outflow that lands in `subset`, given as
/// territory codes.
pub fn concentration_share(
    system: &TerritorySystem,
    observation: &FlowObservation,
    subset: &[&str],
) -> Result<f64, SelectError> {
    let codes = system.destination_codes();
    if codes.len() != observation.counts.len() {
        return Err(SelectError::LengthMismatch { observation: observation.counts.len(), prediction: codes.len() });
    }
    let mut selected = vec![false; codes.len()];
    for code in subset {
        let idx =
            codes.iter().position(|c| c == code).ok_or_else(|| SelectError::UnknownCode { code: code.to_string() })?;
        selected[idx] = true;
    }
    let total = observation.total_outflow();
    if total <= 0.0 {
        return Err(SelectError::EmptyObservation);
    }
    let inside: f64 = observation.counts.iter().zip(&selected).filter(|(_, s)| **s).map(|(c, _)| c).sum();
    Ok(inside / total)
}
