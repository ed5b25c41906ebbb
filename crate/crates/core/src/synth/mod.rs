//! Seeded synthetic systems, flow sampling and brute-force oracles.
//!
//! All randomness comes from ChaCha8 seeded with a 64-bit integer, so the
//! same seed yields the same data on every platform and release.

mod dump;
mod oracle;

pub use dump::write_csv_dataset;
pub use oracle::{brute_force_radiation, grid_search, GridResult};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::domain::{
    CostMatrices, Covariate, CovariateSet, Family, FlowObservation, ParameterVector, SquareMatrix, Territory,
    TerritorySystem,
};
use crate::models::{self, ModelError};

/// Parameter values used to generate flows for each family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub b: f64,
    pub c: f64,
    pub rho: f64,
    pub r: f64,
    pub beta: f64,
    pub alphas: Vec<(Covariate, f64)>,
}

impl Default for GroundTruth {
    fn default() -> Self {
        GroundTruth { b: 0.697, c: 0.368, rho: 2.085, r: 1.038, beta: 0.014, alphas: vec![(Covariate::Knife, -0.013)] }
    }
}

impl GroundTruth {
    pub fn params(&self, family: Family) -> ParameterVector {
        match family {
            Family::Gravity => ParameterVector::Gravity { b: self.b, c: self.c },
            Family::Radiation => ParameterVector::Radiation { rho: self.rho, r: self.r },
            Family::Retail => ParameterVector::Retail { beta: self.beta, alphas: self.alphas.clone() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub territory_count: usize,
    pub seed: u64,
    pub years: Vec<i32>,
    /// Side of the square the territory points are drawn from, in km.
    pub extent_km: f64,
    /// Travel time per km of straight-line distance.
    pub minutes_per_km: f64,
    /// Populations are drawn in scaled units; the radiation opportunity
    /// scale `rho` is only identifiable when `rho * population` is of
    /// order one.
    pub population_range: (f64, f64),
    /// Range of the four rate covariates, per 100 000 inhabitants.
    pub rate_range: (f64, f64),
    pub gdhi_range: (f64, f64),
    pub truth: GroundTruth,
}

impl SynthConfig {
    pub fn new(territory_count: usize, seed: u64) -> Self {
        SynthConfig {
            territory_count,
            seed,
            years: vec![2019, 2020],
            extent_km: 400.0,
            minutes_per_km: 0.9,
            population_range: (0.5, 5.0),
            rate_range: (10.0, 500.0),
            gdhi_range: (15_000.0, 35_000.0),
            truth: GroundTruth::default(),
        }
    }
}

pub fn territory_code(index: usize, count: usize) -> String {
    let width = count.saturating_sub(1).to_string().len().max(2);
    format!("T{index:0width$}")
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Planar territories with the origin at index 0. Distances are Euclidean
/// between the drawn points, so they are symmetric and satisfy the
/// triangle inequality.
pub fn generate_system(config: &SynthConfig) -> TerritorySystem {
    assert!(config.territory_count >= 2, "a system needs an origin and a destination");
    let n = config.territory_count;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut points: Vec<(f64, f64)> = Vec::with_capacity(n);
    while points.len() < n {
        let p = (rng.random_range(0.0..config.extent_km), rng.random_range(0.0..config.extent_km));
        if points.iter().all(|q| (p.0 - q.0).hypot(p.1 - q.1) > 1e-3) {
            points.push(p);
        }
    }

    let territories: Vec<Territory> = points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Territory {
            code: territory_code(i, n),
            name: format!("Territory {i}"),
            population: uniform(&mut rng, config.population_range),
            lon: x,
            lat: y,
        })
        .collect();

    let mut distance = SquareMatrix::zeros(n);
    let mut travel = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = (points[i].0 - points[j].0).hypot(points[i].1 - points[j].1);
                distance.set(i, j, d);
                travel.set(i, j, d * config.minutes_per_km);
            }
        }
    }

    let mut covariates = BTreeMap::new();
    for &year in &config.years {
        let values = (0..n)
            .map(|_| {
                let mut row = [0.0; 5];
                for cov in Covariate::ALL {
                    row[cov.index()] = match cov {
                        Covariate::Gdhi => uniform(&mut rng, config.gdhi_range),
                        _ => uniform(&mut rng, config.rate_range),
                    };
                }
                row
            })
            .collect();
        covariates.insert(year, CovariateSet { year, values });
    }

    TerritorySystem { territories, covariates, costs: CostMatrices { travel_time: travel, distance }, origin_index: 0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Noise {
    /// Expected flows rounded to 6 decimals.
    None,
    /// Independent Poisson counts with the expected flows as means.
    Poisson,
}

pub fn generate_flows(
    params: &ParameterVector,
    system: &TerritorySystem,
    year: i32,
    total_outflow: f64,
    noise: Noise,
    seed: u64,
) -> Result<FlowObservation, ModelError> {
    let expected = models::predict(params, system, year, total_outflow)?.values;
    let counts = match noise {
        Noise::None => expected.iter().map(|v| (v * 1e6).round() / 1e6).collect(),
        Noise::Poisson => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            expected
                .iter()
                .map(|&mean| if mean > 0.0 { Poisson::new(mean).expect("positive mean").sample(&mut rng) } else { 0.0 })
                .collect()
        }
    };
    Ok(FlowObservation::new(year, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::intervening_population;

    #[test]
    fn same_seed_same_system() {
        let config = SynthConfig::new(12, 7);
        assert_eq!(generate_system(&config), generate_system(&config));
        assert_ne!(generate_system(&config), generate_system(&SynthConfig::new(12, 8)));
    }

    #[test]
    fn two_territories_have_no_intervening_population() {
        let system = generate_system(&SynthConfig::new(2, 1));
        assert_eq!(intervening_population(&system, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn distances_are_metric() {
        let system = generate_system(&SynthConfig::new(15, 3));
        let d = &system.costs.distance;
        for i in 0..15 {
            for j in 0..15 {
                assert_eq!(d.get(i, j), d.get(j, i));
                for k in 0..15 {
                    assert!(d.get(i, j) <= d.get(i, k) + d.get(k, j) + 1e-9);
                }
            }
        }
        assert!(crate::domain::validate_system(&system, &[]).is_ok());
    }

    #[test]
    fn codes_sort_in_index_order() {
        let codes: Vec<String> = (0..120).map(|i| territory_code(i, 120)).collect();
        let mut sorted = codes.clone();
        sorted.sort();
        assert_eq!(codes, sorted);
        assert_eq!(territory_code(3, 10), "T03");
    }

    #[test]
    fn poisson_flows_are_reproducible_and_concentrated() {
        let system = generate_system(&SynthConfig::new(10, 4));
        let params = GroundTruth::default().params(Family::Gravity);
        let a = generate_flows(&params, &system, 2019, 4000.0, Noise::Poisson, 11).unwrap();
        let b = generate_flows(&params, &system, 2019, 4000.0, Noise::Poisson, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.counts.iter().all(|c| c.fract() == 0.0));
        assert!((a.total_outflow() - 4000.0).abs() <= 4.0 * 4000f64.sqrt());
    }

    #[test]
    fn noiseless_flows_are_rounded_expectations() {
        let system = generate_system(&SynthConfig::new(6, 5));
        let params = GroundTruth::default().params(Family::Retail);
        let obs = generate_flows(&params, &system, 2020, 2000.0, Noise::None, 0).unwrap();
        let exact = models::predict(&params, &system, 2020, 2000.0).unwrap();
        for (o, e) in obs.counts.iter().zip(&exact.values) {
            assert!((o - e).abs() <= 5e-7);
        }
    }
}
