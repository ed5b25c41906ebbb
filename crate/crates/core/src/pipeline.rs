//! Running many independent evaluations, in parallel when the `parallel`
//! feature is enabled and sequentially otherwise.

use serde::{Deserialize, Serialize};

use crate::calibrate::CalibrateOptions;
use crate::domain::{FlowObservation, ModelSpec, TerritorySystem};
use crate::select::{cross_validate, EvaluationReport, SelectError};

/// Environment variable read for the default job count.
pub const JOBS_ENV: &str = "ODFLOW_JOBS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    /// `jobs == 0` uses every available core.
    Parallel {
        jobs: usize,
    },
}

impl Execution {
    /// `Parallel` with the job count from [`JOBS_ENV`] if set, else all
    /// cores. A job count of 1 means sequential.
    pub fn from_env() -> Self {
        match std::env::var(JOBS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
            Some(1) => Execution::Sequential,
            Some(jobs) => Execution::Parallel { jobs },
            None => Execution::Parallel { jobs: 0 },
        }
    }

    pub fn with_jobs(jobs: usize) -> Self {
        if jobs == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel { jobs }
        }
    }
}

/// Applies `f` to every item, returning results in input order whatever
/// the execution mode.
pub fn map_ordered<T, R, F>(items: &[T], execution: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match execution {
        Execution::Sequential => items.iter().map(f).collect(),
        Execution::Parallel { jobs } => parallel_map(items, jobs, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if jobs == 0 {
        return items.par_iter().map(&f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, R, F>(items: &[T], _jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Cross-validates every spec. Results follow the order of `specs`.
pub fn evaluate_specs(
    specs: &[ModelSpec],
    system: &TerritorySystem,
    observations: &[FlowObservation],
    options: &CalibrateOptions,
    reference_year: Option<i32>,
    execution: Execution,
) -> Vec<Result<EvaluationReport, SelectError>> {
    map_ordered(specs, execution, |spec| cross_validate(spec, system, observations, options, reference_year))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Family;
    use crate::select::enumerate_models;
    use crate::synth::{generate_flows, generate_system, GroundTruth, Noise, SynthConfig};

    #[test]
    fn modes_agree_bit_for_bit() {
        let system = generate_system(&SynthConfig::new(8, 3));
        let truth = GroundTruth::default().params(Family::Retail);
        let flows: Vec<FlowObservation> = [2019, 2020]
            .iter()
            .map(|&y| generate_flows(&truth, &system, y, 500.0, Noise::Poisson, y as u64).unwrap())
            .collect();
        let specs: Vec<ModelSpec> = enumerate_models().into_iter().take(12).collect();
        let options = CalibrateOptions::default();
        let seq = evaluate_specs(&specs, &system, &flows, &options, None, Execution::Sequential);
        let par = evaluate_specs(&specs, &system, &flows, &options, None, Execution::Parallel { jobs: 4 });
        assert_eq!(seq, par);
        assert_eq!(
            seq.iter().map(|r| r.as_ref().unwrap().spec.spec_id).collect::<Vec<_>>(),
            (1..=12).collect::<Vec<_>>()
        );
    }

    #[test]
    fn job_counts() {
        assert_eq!(Execution::with_jobs(1), Execution::Sequential);
        assert_eq!(Execution::with_jobs(3), Execution::Parallel { jobs: 3 });
    }
}
