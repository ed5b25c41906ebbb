//! Model comparison: overlap and information criteria, log-space error,
//! the catalogue of 68 configurations, year-wise cross-validation and
//! ranking.

mod cv;
mod enumerate;
mod metrics;
mod rank;

pub use cv::{cross_validate, cross_validate_with, Calibrated, EvaluationReport, FoldModel, FoldOutcome};
pub use enumerate::{enumerate_models, spec_by_id};
pub use metrics::{bic, bic_textbook, concentration_share, log_mse, sorensen_dice, LogMse};
pub use rank::{rank_models, RankKey, RankingTable};

use thiserror::Error;

use crate::calibrate::CalibrateError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectError {
    #[error(transparent)]
    Calibrate(#[from] CalibrateError),
    #[error("observed and modelled totals are both zero")]
    BothEmpty,
    #[error("observation has {observation} entries, prediction has {prediction}")]
    LengthMismatch { observation: usize, prediction: usize },
    #[error("prediction {value} at destination {index} is not positive")]
    NonPositivePrediction { index: usize, value: f64 },
    #[error("observation has no positive counts")]
    EmptyObservation,
    #[error("unknown territory code {code}")]
    UnknownCode { code: String },
    #[error("cross-validation needs exactly two yearly observations, found {found}")]
    FoldCount { found: usize },
    #[error("no observation for year {year}")]
    MissingYear { year: i32 },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::{CalibrateOptions, CalibrationResult, LossValue, Termination};
    use crate::domain::{Covariate, CovariateMask, FlowObservation, Loss, ModelSpec, ParameterVector, TerritorySystem};
    use crate::models::test_support::star_system;
    use crate::models::FlowPrediction;

    fn system() -> TerritorySystem {
        let travel = [20.0, 45.0, 60.0, 90.0, 130.0];
        let mut sys = star_system(&[1.0, 2.0, 3.0, 4.0, 5.0], &travel, &travel);
        let base = sys.covariates[&2019].clone();
        sys.covariates.insert(2020, crate::domain::CovariateSet { year: 2020, values: base.values });
        sys
    }

    #[test]
    fn concentration_examples() {
        let sys = star_system(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        let obs = FlowObservation::new(2019, vec![10.0, 30.0, 60.0]);
        assert_eq!(concentration_share(&sys, &obs, &["D01", "D02", "D03"]).unwrap(), 1.0);
        assert_eq!(concentration_share(&sys, &obs, &[]).unwrap(), 0.0);
        assert!((concentration_share(&sys, &obs, &["D02", "D03"]).unwrap() - 0.9).abs() < 1e-15);
        assert!(matches!(concentration_share(&sys, &obs, &["XX"]), Err(SelectError::UnknownCode { .. })));
        let empty = FlowObservation::new(2019, vec![0.0; 3]);
        assert_eq!(concentration_share(&sys, &empty, &["D01"]), Err(SelectError::EmptyObservation));
    }

    #[test]
    fn identical_years_give_identical_fold_scores() {
        let sys = system();
        let counts = vec![40.0, 25.0, 20.0, 10.0, 5.0];
        let obs = [FlowObservation::new(2019, counts.clone()), FlowObservation::new(2020, counts)];
        let spec = ModelSpec::retail(5, Loss::Poisson, CovariateMask::NONE);
        let report = cross_validate(&spec, &sys, &obs, &CalibrateOptions::default(), None).unwrap();
        assert_eq!(report.s_for_year(2019), report.s_for_year(2020));
        assert_eq!(report.s_mean, (report.s_per_fold[0].1 + report.s_per_fold[1].1) / 2.0);
        assert_eq!(report.reference_year, 2019);
        assert!(report.bic.is_some());
        assert!(report.folds.iter().all(|f| f.calibration.std_errors.len() == 1));
    }

    /// Predicts exactly the observed counts of the requested year.
    struct Oracle<'a>(&'a [FlowObservation]);

    impl FoldModel for Oracle<'_> {
        fn fit(
            &self,
            spec: &ModelSpec,
            _: &TerritorySystem,
            observation: &FlowObservation,
        ) -> Result<CalibrationResult, CalibrateError> {
            Ok(CalibrationResult {
                spec: *spec,
                training_year: observation.year,
                params: ParameterVector::Retail { beta: 0.0, alphas: vec![] },
                std_errors: vec![],
                loss: LossValue::new(0.0, &[], 0.0),
                log_likelihood: Some(-1.0),
                iterations: 0,
                converged: true,
                termination: Termination::GradientNorm,
                gradient_norm: 0.0,
                skipped_starts: 0,
                warnings: vec![],
            })
        }

        fn predict(
            &self,
            fit: &CalibrationResult,
            _: &TerritorySystem,
            year: i32,
            _: f64,
        ) -> Result<FlowPrediction, CalibrateError> {
            let obs = self.0.iter().find(|o| o.year == year).unwrap();
            Ok(FlowPrediction { year, family: fit.spec.family, values: obs.counts.clone() })
        }
    }

    #[test]
    fn data_oracle_scores_perfectly() {
        let sys = system();
        let obs = [
            FlowObservation::new(2020, vec![4.0, 0.0, 2.0, 1.0, 9.0]),
            FlowObservation::new(2019, vec![40.0, 25.0, 20.0, 10.0, 5.0]),
        ];
        let spec = ModelSpec::retail(5, Loss::Poisson, CovariateMask::NONE);
        let report = cross_validate_with(&Oracle(&obs), &spec, &sys, &obs, Some(2020)).unwrap();
        assert_eq!(report.s_mean, 1.0);
        assert_eq!(report.log_mse.unwrap().value, 0.0);
        assert_eq!(report.log_mse.unwrap().excluded, 1);
        assert_eq!(report.reference_year, 2020);
    }

    #[test]
    fn fold_count_is_checked() {
        let sys = system();
        let obs = [FlowObservation::new(2019, vec![1.0; 5])];
        let spec = ModelSpec::gravity(1, Loss::Gaussian);
        assert_eq!(
            cross_validate(&spec, &sys, &obs, &CalibrateOptions::default(), None).unwrap_err(),
            SelectError::FoldCount { found: 1 }
        );
    }

    fn report(spec: ModelSpec, bic: f64, s: f64) -> EvaluationReport {
        EvaluationReport {
            spec,
            folds: vec![],
            s_per_fold: vec![(2019, s), (2020, s)],
            s_mean: s,
            reference_year: 2019,
            bic: Some(bic),
            bic_textbook: None,
            log_mse: None,
            rank: None,
        }
    }

    #[test]
    fn ranking_rules() {
        let knife = CovariateMask::from_covariates(&[Covariate::Knife]);
        let single = rank_models(vec![report(ModelSpec::gravity(2, Loss::Poisson), 10.0, 0.5)], RankKey::Bic);
        assert_eq!(single.entries[0].rank, Some(1));

        let tied = rank_models(
            vec![
                report(
                    ModelSpec::retail(
                        13,
                        Loss::Poisson,
                        CovariateMask::from_covariates(&[Covariate::Misuse, Covariate::Knife]),
                    ),
                    5.0,
                    0.5,
                ),
                report(ModelSpec::retail(5, Loss::Poisson, CovariateMask::NONE), 5.0, 0.5),
            ],
            RankKey::Bic,
        );
        assert_eq!(tied.entries[0].spec.spec_id, 5);

        let ordered = rank_models(
            vec![
                report(ModelSpec::gravity(2, Loss::Poisson), 30.0, 0.2),
                report(ModelSpec::retail(9, Loss::Poisson, knife), 10.0, 0.9),
                report(ModelSpec::radiation(4, Loss::Poisson), 20.0, 0.5),
            ],
            RankKey::Bic,
        );
        let ids: Vec<u32> = ordered.entries.iter().map(|r| r.spec.spec_id).collect();
        assert_eq!(ids, vec![9, 4, 2]);
        let by_s = rank_models(ordered.entries, RankKey::SMean);
        assert_eq!(by_s.entries.iter().map(|r| r.spec.spec_id).collect::<Vec<_>>(), vec![9, 4, 2]);
        assert_eq!(by_s.entries.iter().map(|r| r.rank.unwrap()).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn missing_values_rank_last() {
        let mut missing = report(ModelSpec::gravity(1, Loss::Gaussian), 0.0, 0.1);
        missing.bic = None;
        let table = rank_models(vec![missing, report(ModelSpec::gravity(2, Loss::Poisson), 99.0, 0.1)], RankKey::Bic);
        assert_eq!(table.entries[0].spec.spec_id, 2);
    }
}
