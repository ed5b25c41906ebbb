//! Model calibration: penalized losses, multi-start quasi-Newton
//! minimization, log-likelihoods and observed-information standard errors.

mod bfgs;
pub mod loss;
mod objective;

pub use bfgs::Termination;
pub use loss::{gaussian_loss, log_likelihood, poisson_loss, LossError, LossValue, PREDICTION_FLOOR};
pub use objective::{Evaluation, Objective};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Family, FlowObservation, Loss, ModelSpec, ParameterVector, TerritorySystem};
use crate::models::ModelError;

use bfgs::BfgsSettings;
use objective::{chain_to_unconstrained, to_natural, to_unconstrained};

/// Default L2 penalty weight.
pub const DEFAULT_LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("expected {expected} parameters, found {found}")]
    ParameterCount { expected: usize, found: usize },
    #[error("loss is not finite at every start point")]
    NonFiniteLoss,
    #[error("observed information matrix is singular")]
    SingularInformation,
    #[error("calibration did not converge")]
    NotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrateOptions {
    pub lambda: f64,
    /// Gradient infinity-norm threshold in optimizer coordinates.
    pub tolerance: f64,
    pub relative_loss_tolerance: f64,
    pub max_iter: usize,
}

impl Default for CalibrateOptions {
    fn default() -> Self {
        CalibrateOptions { lambda: DEFAULT_LAMBDA, tolerance: 1e-8, relative_loss_tolerance: 1e-12, max_iter: 10_000 }
    }
}

impl CalibrateOptions {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CalibrationWarning {
    /// The data term does not depend on the parameters; any point is optimal.
    FlatObjective,
    /// Log-likelihood undefined (zero residual variance).
    DegenerateVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub spec: ModelSpec,
    pub training_year: i32,
    pub params: ParameterVector,
    /// One entry per parameter; `None` where the information matrix could not
    /// be inverted. Empty until [`standard_errors`] has been applied.
    pub std_errors: Vec<Option<f64>>,
    pub loss: LossValue,
    pub log_likelihood: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Gradient infinity-norm at `params`, in optimizer coordinates.
    pub gradient_norm: f64,
    pub skipped_starts: usize,
    pub warnings: Vec<CalibrationWarning>,
}

impl CalibrationResult {
    pub fn theta(&self) -> Vec<f64> {
        self.params.to_vec()
    }
}

/// Fixed start grid in natural parameters.
pub fn start_points(spec: &ModelSpec) -> Vec<Vec<f64>> {
    const GRID: [f64; 3] = [0.5, 1.0, 2.0];
    match spec.family {
        Family::Gravity | Family::Radiation => {
            GRID.iter().flat_map(|&a| GRID.iter().map(move |&b| vec![a, b])).collect()
        }
        Family::Retail => [0.001, 0.01, 0.1]
            .iter()
            .map(|&beta| std::iter::once(beta).chain(std::iter::repeat_n(0.0, spec.mask.count())).collect())
            .collect(),
    }
}

/// Multi-start minimization of the penalized loss of `spec` on one year of
/// data. Deterministic: the same inputs give a bit-identical result.
pub fn minimize(
    spec: &ModelSpec,
    system: &TerritorySystem,
    observation: &FlowObservation,
    options: &CalibrateOptions,
) -> Result<CalibrationResult, CalibrateError> {
    minimize_from(spec, system, observation, options, &start_points(spec))
}

/// As [`minimize`], with caller-supplied start points in natural parameters.
pub fn minimize_from(
    spec: &ModelSpec,
    system: &TerritorySystem,
    observation: &FlowObservation,
    options: &CalibrateOptions,
    starts: &[Vec<f64>],
) -> Result<CalibrationResult, CalibrateError> {
    let objective = Objective::new(*spec, system, observation, options.lambda);
    let family = spec.family;
    let settings = BfgsSettings {
        gradient_tolerance: options.tolerance,
        relative_loss_tolerance: options.relative_loss_tolerance,
        max_iterations: options.max_iter,
    };
    let eval = |eta: &[f64]| {
        let theta = to_natural(family, eta);
        objective.evaluate(&theta).ok().map(|e| (e.loss.total, chain_to_unconstrained(family, &theta, &e.gradient)))
    };

    let mut best: Option<bfgs::BfgsOutcome> = None;
    let mut skipped = 0;
    let mut start_data_terms = Vec::new();
    for start in starts {
        if let Ok(l) = objective.loss(start) {
            start_data_terms.push(l.data_term);
        }
        match bfgs::minimize(eval, &to_unconstrained(family, start), settings) {
            Some(outcome) => {
                if best.as_ref().is_none_or(|b| outcome.value < b.value) {
                    best = Some(outcome);
                }
            }
            None => skipped += 1,
        }
    }
    let best = best.ok_or(CalibrateError::NonFiniteLoss)?;

    let theta = to_natural(family, &best.x);
    let final_eval = objective.evaluate(&theta)?;
    let mut warnings = Vec::new();
    let flat_starts = start_data_terms.len() > 1
        && start_data_terms.windows(2).all(|w| (w[0] - w[1]).abs() <= 1e-12 * w[0].abs().max(1e-300));
    let data_grad = chain_to_unconstrained(family, &theta, &final_eval.data_gradient);
    if flat_starts && data_grad.iter().all(|g| g.abs() < options.tolerance) {
        warnings.push(CalibrationWarning::FlatObjective);
    }
    let log_likelihood = match loss::log_likelihood(spec.loss, &final_eval.prediction, observation) {
        Ok(ll) => Some(ll),
        Err(LossError::DegenerateVariance) => {
            warnings.push(CalibrationWarning::DegenerateVariance);
            None
        }
        Err(e) => return Err(e.into()),
    };
    let gradient_norm = best.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));

    Ok(CalibrationResult {
        spec: *spec,
        training_year: observation.year,
        params: objective.params(&theta)?,
        std_errors: Vec::new(),
        loss: final_eval.loss,
        log_likelihood,
        iterations: best.iterations,
        converged: best.termination.is_converged(),
        termination: best.termination,
        gradient_norm,
        skipped_starts: skipped,
        warnings,
    })
}

/// Standard errors from the inverse observed information of the unpenalized
/// negative log-likelihood, `N x data_term`, in natural parameters.
///
/// For the Gaussian loss the information is divided by the profile residual
/// variance. The Hessian is built from central differences of the analytic
/// gradient with step `1e-5 * max(1, |theta_k|)`.
pub fn standard_errors(
    result: &CalibrationResult,
    system: &TerritorySystem,
    observation: &FlowObservation,
) -> Result<Vec<f64>, CalibrateError> {
    if !result.converged {
        return Err(CalibrateError::NotConverged);
    }
    let objective = Objective::new(result.spec, system, observation, 0.0);
    let n = observation.len() as f64;
    let theta = result.theta();
    let scale = match result.spec.loss {
        Loss::Poisson => n,
        Loss::Gaussian => {
            let pred = objective.predict(&theta)?;
            let sigma2 = pred.values.iter().zip(&observation.counts).map(|(m, d)| (d - m) * (d - m)).sum::<f64>() / n;
            if !(sigma2 > 0.0) {
                return Err(CalibrateError::SingularInformation);
            }
            n / sigma2
        }
    };
    fisher_standard_errors(
        |t: &[f64]| objective.evaluate(t).ok().map(|e| e.data_gradient.iter().map(|g| g * scale).collect()),
        &theta,
    )
}

/// Square roots of the diagonal of the inverse Hessian of a negative
/// log-likelihood whose gradient is `gradient`, evaluated at `theta`.
pub fn fisher_standard_errors<G>(gradient: G, theta: &[f64]) -> Result<Vec<f64>, CalibrateError>
where
    G: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let k = theta.len();
    let mut hessian = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let h = 1e-5 * theta[j].abs().max(1.0);
        let mut up = theta.to_vec();
        let mut down = theta.to_vec();
        up[j] += h;
        down[j] -= h;
        let gu = gradient(&up).ok_or(CalibrateError::NonFiniteLoss)?;
        let gd = gradient(&down).ok_or(CalibrateError::NonFiniteLoss)?;
        for i in 0..k {
            hessian[(i, j)] = (gu[i] - gd[i]) / (2.0 * h);
        }
    }
    let hessian = (&hessian + hessian.transpose()) * 0.5;
    if hessian.iter().any(|v| !v.is_finite()) {
        return Err(CalibrateError::SingularInformation);
    }
    let diag: Vec<f64> = (0..k).map(|i| hessian[(i, i)]).collect();
    if diag.iter().any(|d| !(*d > 0.0)) {
        return Err(CalibrateError::SingularInformation);
    }
    // conditioning judged on the correlation-scaled matrix so that parameter
    // units do not matter
    let scaled = DMatrix::from_fn(k, k, |i, j| hessian[(i, j)] / (diag[i] * diag[j]).sqrt());
    let eigen = SymmetricEigen::new(scaled);
    let min_eig = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_eig > 1e-9) {
        return Err(CalibrateError::SingularInformation);
    }
    let inverse_scaled = &eigen.eigenvectors
        * DMatrix::from_diagonal(&eigen.eigenvalues.map(|v| 1.0 / v))
        * eigen.eigenvectors.transpose();
    Ok((0..k).map(|i| (inverse_scaled[(i, i)] / diag[i]).sqrt()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Covariate, CovariateMask};
    use crate::models::test_support::star_system;
    use crate::models::{predict, retail_flows};
    use approx::assert_relative_eq;

    fn retail_test_system() -> TerritorySystem {
        let travel = [20.0, 45.0, 60.0, 90.0, 130.0, 150.0, 200.0, 240.0];
        let mut sys = star_system(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], &travel, &travel);
        for (i, row) in sys.covariates.get_mut(&2019).unwrap().values.iter_mut().enumerate() {
            row[Covariate::Knife.index()] = 5.0 + 40.0 * ((i * 37 % 11) as f64);
        }
        sys
    }

    #[test]
    fn start_grids() {
        assert_eq!(start_points(&ModelSpec::gravity(1, Loss::Poisson)).len(), 9);
        let retail = ModelSpec::retail(9, Loss::Poisson, CovariateMask::from_covariates(&[Covariate::Knife]));
        assert_eq!(start_points(&retail), vec![vec![0.001, 0.0], vec![0.01, 0.0], vec![0.1, 0.0]]);
    }

    #[test]
    fn recovers_retail_beta_from_noiseless_data() {
        let sys = retail_test_system();
        let spec = ModelSpec::retail(5, Loss::Poisson, CovariateMask::NONE);
        let truth = retail_flows(0.014, &[], &sys, 2019, 2000.0).unwrap();
        let obs = FlowObservation::new(2019, truth.values.iter().map(|v| (v * 1e6).round() / 1e6).collect());
        let result = minimize(&spec, &sys, &obs, &CalibrateOptions::default().with_lambda(0.0)).unwrap();
        assert!(result.converged, "{result:?}");
        let beta = result.theta()[0];
        assert!((beta - 0.014).abs() < 1e-3, "beta = {beta}");
    }

    #[test]
    fn symmetric_gravity_system_is_flat() {
        let sys = star_system(&[5.0, 5.0, 5.0], &[10.0, 10.0, 10.0], &[1.0, 1.0, 1.0]);
        let obs = FlowObservation::new(2019, vec![4.0, 1.0, 7.0]);
        let spec = ModelSpec::gravity(2, Loss::Poisson);
        let result = minimize(&spec, &sys, &obs, &CalibrateOptions::default().with_lambda(0.0)).unwrap();
        assert!(result.converged);
        assert!(result.warnings.contains(&CalibrationWarning::FlatObjective));
    }

    #[test]
    fn minimize_is_bit_deterministic() {
        let sys = retail_test_system();
        let spec = ModelSpec::retail(9, Loss::Poisson, CovariateMask::from_covariates(&[Covariate::Knife]));
        let obs = FlowObservation::new(2019, vec![400.0, 300.0, 350.0, 200.0, 120.0, 90.0, 30.0, 10.0]);
        let a = minimize(&spec, &sys, &obs, &CalibrateOptions::default()).unwrap();
        let b = minimize(&spec, &sys, &obs, &CalibrateOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generating_parameters_are_stationary() {
        let sys = retail_test_system();
        let theta = [0.014, -0.013];
        let params = ParameterVector::Retail { beta: 0.014, alphas: vec![(Covariate::Knife, -0.013)] };
        let obs_values = predict(&params, &sys, 2019, 2000.0).unwrap().values;
        let obs = FlowObservation::new(2019, obs_values);
        for loss in [Loss::Poisson, Loss::Gaussian] {
            let spec = ModelSpec::retail(9, loss, CovariateMask::from_covariates(&[Covariate::Knife]));
            let eval = Objective::new(spec, &sys, &obs, 0.0).evaluate(&theta).unwrap();
            assert!(eval.gradient.iter().all(|g| g.abs() < 1e-6), "{:?}", eval.gradient);
        }
    }

    /// Negative log-likelihood gradient of `T_j = mu` for every destination.
    fn poisson_mean_gradient(data: &[f64]) -> impl Fn(&[f64]) -> Option<Vec<f64>> + '_ {
        move |t: &[f64]| Some(vec![data.iter().map(|d| 1.0 - d / t[0]).sum()])
    }

    #[test]
    fn fisher_errors_match_poisson_mean() {
        let data = [3.0, 7.0, 4.0, 6.0, 5.0, 2.0, 8.0, 5.0];
        let mu = data.iter().sum::<f64>() / data.len() as f64;
        let se = fisher_standard_errors(poisson_mean_gradient(&data), &[mu]).unwrap();
        let analytic = (mu / data.len() as f64).sqrt();
        assert_relative_eq!(se[0], analytic, max_relative = 1e-4);

        let replicated: Vec<f64> = data.iter().cycle().take(4 * data.len()).copied().collect();
        let se4 = fisher_standard_errors(poisson_mean_gradient(&replicated), &[mu]).unwrap();
        assert_relative_eq!(se4[0], se[0] / 2.0, max_relative = 1e-4);
    }

    #[test]
    fn duplicated_covariates_are_singular() {
        let mut sys = retail_test_system();
        for row in sys.covariates.get_mut(&2019).unwrap().values.iter_mut() {
            row[Covariate::Misuse.index()] = row[Covariate::Knife.index()];
        }
        let spec = ModelSpec::retail(
            13,
            Loss::Poisson,
            CovariateMask::from_covariates(&[Covariate::Misuse, Covariate::Knife]),
        );
        let obs = FlowObservation::new(2019, vec![400.0, 300.0, 350.0, 200.0, 120.0, 90.0, 30.0, 10.0]);
        let result = minimize(&spec, &sys, &obs, &CalibrateOptions::default()).unwrap();
        assert_eq!(standard_errors(&result, &sys, &obs), Err(CalibrateError::SingularInformation));
    }
}
