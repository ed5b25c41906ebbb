//! Penalized loss of one model specification as a function of its flat
//! parameter vector, with analytic gradients by the chain rule through the
//! softmax.

use crate::domain::{Family, FlowObservation, ModelSpec, ParameterVector, TerritorySystem};
use crate::models::{self, FlowPrediction};

use super::loss::{self, LossValue};
use super::CalibrateError;

#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub spec: ModelSpec,
    pub system: &'a TerritorySystem,
    pub observation: &'a FlowObservation,
    pub lambda: f64,
}

/// Loss, its gradient with respect to the natural parameters, and the
/// prediction it was computed from.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: LossValue,
    pub gradient: Vec<f64>,
    pub data_gradient: Vec<f64>,
    pub prediction: FlowPrediction,
}

impl<'a> Objective<'a> {
    pub fn new(spec: ModelSpec, system: &'a TerritorySystem, observation: &'a FlowObservation, lambda: f64) -> Self {
        Objective { spec, system, observation, lambda }
    }

    pub fn params(&self, theta: &[f64]) -> Result<ParameterVector, CalibrateError> {
        ParameterVector::from_slice(&self.spec, theta)
            .ok_or(CalibrateError::ParameterCount { expected: self.spec.param_count(), found: theta.len() })
    }

    pub fn predict(&self, theta: &[f64]) -> Result<FlowPrediction, CalibrateError> {
        let params = self.params(theta)?;
        Ok(models::predict(&params, self.system, self.observation.year, self.observation.total_outflow())?)
    }

    pub fn loss(&self, theta: &[f64]) -> Result<LossValue, CalibrateError> {
        let prediction = self.predict(theta)?;
        Ok(loss::loss_value(self.spec.loss, &prediction, self.observation, theta, self.lambda)?)
    }

    /// Loss and analytic gradient at natural parameters `theta`.
    pub fn evaluate(&self, theta: &[f64]) -> Result<Evaluation, CalibrateError> {
        let params = self.params(theta)?;
        let lw = models::log_weights(&params, self.system, self.observation.year)?;
        let total = self.observation.total_outflow();
        let values = models::softmax_scaled(&lw.values, total, self.system)?;
        let prediction = FlowPrediction { year: self.observation.year, family: self.spec.family, values };
        let loss = loss::loss_value(self.spec.loss, &prediction, self.observation, theta, self.lambda)?;

        let dl_dt = loss::data_term_gradient(self.spec.loss, &prediction.values, &self.observation.counts);
        let k = theta.len();
        // dT_j/dtheta_k = T_j (x_jk - sum_i s_i x_ik) with s_i = T_i / T_L
        let mut data_gradient = vec![0.0; k];
        let mut weighted_mean = vec![0.0; k];
        let mut g_dot_t = 0.0;
        for (j, row) in lw.jacobian.iter().enumerate() {
            let t = prediction.values[j];
            g_dot_t += dl_dt[j] * t;
            for (kk, x) in row.iter().enumerate() {
                data_gradient[kk] += dl_dt[j] * t * x;
                if total > 0.0 {
                    weighted_mean[kk] += t / total * x;
                }
            }
        }
        for kk in 0..k {
            data_gradient[kk] -= g_dot_t * weighted_mean[kk];
        }
        let gradient = data_gradient.iter().zip(theta).map(|(g, t)| g + 2.0 * self.lambda * t).collect();
        Ok(Evaluation { loss, gradient, data_gradient, prediction })
    }
}

/// Maps natural parameters to the unconstrained optimizer coordinates
/// (logarithms for the radiation family).
pub(crate) fn to_unconstrained(family: Family, theta: &[f64]) -> Vec<f64> {
    match family {
        Family::Radiation => theta.iter().map(|t| t.ln()).collect(),
        _ => theta.to_vec(),
    }
}

pub(crate) fn to_natural(family: Family, eta: &[f64]) -> Vec<f64> {
    match family {
        Family::Radiation => eta.iter().map(|e| e.exp()).collect(),
        _ => eta.to_vec(),
    }
}

/// Gradient with respect to the unconstrained coordinates.
pub(crate) fn chain_to_unconstrained(family: Family, theta: &[f64], gradient: &[f64]) -> Vec<f64> {
    match family {
        Family::Radiation => gradient.iter().zip(theta).map(|(g, t)| g * t).collect(),
        _ => gradient.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Covariate, CovariateMask, Loss};
    use crate::models::test_support::star_system;

    fn central_difference(obj: &Objective, theta: &[f64], k: usize) -> f64 {
        let h = 1e-3 * theta[k].abs().max(0.1);
        let at = |step: f64| {
            let mut t = theta.to_vec();
            t[k] += step * h;
            obj.loss(&t).unwrap().total
        };
        (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h)
    }

    #[test]
    fn gradients_match_finite_differences_on_small_system() {
        let mut sys = star_system(&[3.0, 1.5, 0.7, 2.2], &[10.0, 25.0, 40.0, 18.0], &[15.0, 30.0, 55.0, 20.0]);
        for (i, row) in sys.covariates.get_mut(&2019).unwrap().values.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = 1.0 + ((i * 7 + c * 3) % 5) as f64;
            }
        }
        let obs = FlowObservation::new(2019, vec![12.0, 3.0, 0.0, 8.0]);
        let mask = CovariateMask::from_covariates(&[Covariate::Misuse, Covariate::Gdhi]);
        let cases: Vec<(ModelSpec, Vec<f64>)> = vec![
            (ModelSpec::gravity(1, Loss::Gaussian), vec![0.7, 0.4]),
            (ModelSpec::gravity(2, Loss::Poisson), vec![1.3, -0.2]),
            (ModelSpec::radiation(3, Loss::Gaussian), vec![2.0, 1.1]),
            (ModelSpec::radiation(4, Loss::Poisson), vec![0.6, 0.8]),
            (ModelSpec::retail(14, Loss::Poisson, mask), vec![0.02, -0.3, 0.5]),
            (ModelSpec::retail(46, Loss::Gaussian, mask), vec![0.05, 0.2, -0.1]),
        ];
        for lambda in [0.0, 1.0] {
            for (spec, theta) in &cases {
                let obj = Objective::new(*spec, &sys, &obs, lambda);
                let eval = obj.evaluate(theta).unwrap();
                for k in 0..theta.len() {
                    let fd = central_difference(&obj, theta, k);
                    let a = eval.gradient[k];
                    assert!((a - fd).abs() <= 1e-6 * a.abs().max(fd.abs()).max(1e-4), "{spec:?} k={k}: {a} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn reparameterization_round_trips() {
        let theta = [2.085, 1.038];
        let eta = to_unconstrained(Family::Radiation, &theta);
        let back = to_natural(Family::Radiation, &eta);
        assert!((back[0] - theta[0]).abs() < 1e-15 && (back[1] - theta[1]).abs() < 1e-15);
        assert_eq!(to_unconstrained(Family::Retail, &theta), theta.to_vec());
    }
}
