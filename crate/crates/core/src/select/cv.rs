use serde::{Deserialize, Serialize};

use crate::calibrate::{self, loss, CalibrateError, CalibrateOptions, CalibrationResult};
use crate::domain::{FlowObservation, ModelSpec, TerritorySystem};
use crate::models::{self, FlowPrediction};

use super::metrics::{bic, bic_textbook, log_mse_raw, sorensen_dice, LogMse};
use super::SelectError;

/// How a fold obtains its fitted model and predictions. The production
/// implementation is [`Calibrated`]; tests substitute oracles.
pub trait FoldModel {
    fn fit(
        &self,
        spec: &ModelSpec,
        system: &TerritorySystem,
        observation: &FlowObservation,
    ) -> Result<CalibrationResult, CalibrateError>;

    fn predict(
        &self,
        fit: &CalibrationResult,
        system: &TerritorySystem,
        year: i32,
        total_outflow: f64,
    ) -> Result<FlowPrediction, CalibrateError>;
}

/// Multi-start calibration followed by standard errors.
#[derive(Debug, Clone, Copy, Default)]
pub struct Calibrated(pub CalibrateOptions);

impl FoldModel for Calibrated {
    fn fit(
        &self,
        spec: &ModelSpec,
        system: &TerritorySystem,
        observation: &FlowObservation,
    ) -> Result<CalibrationResult, CalibrateError> {
        let mut result = calibrate::minimize(spec, system, observation, &self.0)?;
        result.std_errors = match calibrate::standard_errors(&result, system, observation) {
            Ok(se) => se.into_iter().map(Some).collect(),
            Err(_) => vec![None; spec.param_count()],
        };
        Ok(result)
    }

    fn predict(
        &self,
        fit: &CalibrationResult,
        system: &TerritorySystem,
        year: i32,
        total_outflow: f64,
    ) -> Result<FlowPrediction, CalibrateError> {
        Ok(models::predict(&fit.params, system, year, total_outflow)?)
    }
}

/// One direction of the two-fold year-wise cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub train_year: i32,
    pub test_year: i32,
    pub calibration: CalibrationResult,
    /// Sørensen-Dice on the held-out year, constrained by its own outflow.
    pub s_test: f64,
    /// Criterion on the training year alone (`M` = destinations).
    pub bic_train: Option<f64>,
    /// Criterion with both years scored at the training parameters.
    pub bic_pooled: Option<f64>,
    pub bic_pooled_textbook: Option<f64>,
    /// Log-space MSE over both years at the training parameters.
    pub log_mse: Option<LogMse>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub spec: ModelSpec,
    pub folds: Vec<FoldOutcome>,
    /// Held-out Sørensen-Dice keyed by the year it was scored on, ascending.
    pub s_per_fold: Vec<(i32, f64)>,
    pub s_mean: f64,
    /// Training year whose fold supplies `bic`, `bic_textbook` and `log_mse`.
    pub reference_year: i32,
    pub bic: Option<f64>,
    pub bic_textbook: Option<f64>,
    pub log_mse: Option<LogMse>,
    pub rank: Option<usize>,
}

impl EvaluationReport {
    pub fn reference_fold(&self) -> &FoldOutcome {
        self.folds.iter().find(|f| f.train_year == self.reference_year).unwrap_or(&self.folds[0])
    }

    pub fn s_for_year(&self, year: i32) -> Option<f64> {
        self.s_per_fold.iter().find(|(y, _)| *y == year).map(|(_, s)| *s)
    }
}

/// Two-fold cross-validation with the calibrating fold model.
pub fn cross_validate(
    spec: &ModelSpec,
    system: &TerritorySystem,
    observations: &[FlowObservation],
    options: &CalibrateOptions,
    reference_year: Option<i32>,
) -> Result<EvaluationReport, SelectError> {
    cross_validate_with(&Calibrated(*options), spec, system, observations, reference_year)
}

pub fn cross_validate_with(
    model: &dyn FoldModel,
    spec: &ModelSpec,
    system: &TerritorySystem,
    observations: &[FlowObservation],
    reference_year: Option<i32>,
) -> Result<EvaluationReport, SelectError> {
    let [first, second] = observations else {
        return Err(SelectError::FoldCount { found: observations.len() });
    };
    let mut years = [first, second];
    years.sort_by_key(|o| o.year);
    let reference_year = reference_year.unwrap_or(years[0].year);
    if !years.iter().any(|o| o.year == reference_year) {
        return Err(SelectError::MissingYear { year: reference_year });
    }

    let mut folds = Vec::with_capacity(2);
    for (train, test) in [(years[0], years[1]), (years[1], years[0])] {
        let calibration = model.fit(spec, system, train)?;
        let predictions = [
            model.predict(&calibration, system, years[0].year, years[0].total_outflow())?,
            model.predict(&calibration, system, years[1].year, years[1].total_outflow())?,
        ];
        let held_out = if test.year == years[0].year { &predictions[0] } else { &predictions[1] };
        let s_test = sorensen_dice(test, held_out)?;

        let n = train.len();
        let bic_train = calibration.log_likelihood.map(|ll| bic(n, ll));
        let pooled_model: Vec<f64> = predictions.iter().flat_map(|p| p.values.iter().copied()).collect();
        let pooled_data: Vec<f64> = years.iter().flat_map(|o| o.counts.iter().copied()).collect();
        let pooled_ll = loss::log_likelihood_raw(spec.loss, &pooled_model, &pooled_data).ok();
        let m = pooled_data.len();
        folds.push(FoldOutcome {
            train_year: train.year,
            test_year: test.year,
            s_test,
            bic_train,
            bic_pooled: pooled_ll.map(|ll| bic(m, ll)),
            bic_pooled_textbook: pooled_ll.map(|ll| bic_textbook(spec.param_count(), m, ll)),
            log_mse: log_mse_raw(&pooled_data, &pooled_model).ok(),
            calibration,
        });
    }

    let mut s_per_fold: Vec<(i32, f64)> = folds.iter().map(|f| (f.test_year, f.s_test)).collect();
    s_per_fold.sort_by_key(|(y, _)| *y);
    let s_mean = (s_per_fold[0].1 + s_per_fold[1].1) / 2.0;
    let reference = folds.iter().find(|f| f.train_year == reference_year).expect("reference fold exists");
    Ok(EvaluationReport {
        spec: *spec,
        bic: reference.bic_pooled,
        bic_textbook: reference.bic_pooled_textbook,
        log_mse: reference.log_mse,
        folds,
        s_per_fold,
        s_mean,
        reference_year,
        rank: None,
    })
}
