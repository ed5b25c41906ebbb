use serde::{Deserialize, Serialize};

use super::IngestError;

/// Events per 100 000 inhabitants.
pub fn per_capita_100k(count: f64, population: f64) -> f64 {
    count / population * 100_000.0
}

/// Divides an admission rate by hospital beds per capita.
pub fn bed_adjust(admission_rate: f64, beds_per_capita: f64) -> Result<f64, IngestError> {
    if !(beds_per_capita > 0.0) {
        return Err(IngestError::ZeroBeds { beds_per_capita });
    }
    Ok(admission_rate / beds_per_capita)
}

/// Population-weighted mean of `(value, population)` pairs.
pub fn aggregate_weighted(members: &[(f64, f64)]) -> Result<f64, IngestError> {
    if members.is_empty() {
        return Err(IngestError::EmptyGroup);
    }
    let weight: f64 = members.iter().map(|(_, p)| p).sum();
    if !(weight > 0.0) {
        return Err(IngestError::EmptyGroup);
    }
    Ok(members.iter().map(|(v, p)| v * p).sum::<f64>() / weight)
}

/// Plain sum of additive counts.
pub fn aggregate_sum(counts: &[f64]) -> f64 {
    counts.iter().sum()
}

/// Raw statistics of one territory for one year, before normalization.
/// Counts are additive; `gdhi_per_head` and `beds_per_capita` are
/// intensive and combine by population weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawCovariates {
    pub population: f64,
    pub misuse_admissions: f64,
    pub poisoning_admissions: f64,
    pub police_fte: f64,
    pub knife_crimes: f64,
    pub gdhi_per_head: f64,
    pub beds_per_capita: f64,
}

impl RawCovariates {
    /// Combines member areas: counts summed, intensive values weighted by
    /// member population.
    pub fn aggregate(members: &[RawCovariates]) -> Result<RawCovariates, IngestError> {
        let sum = |f: fn(&RawCovariates) -> f64| aggregate_sum(&members.iter().map(f).collect::<Vec<_>>());
        let weighted = |f: fn(&RawCovariates) -> f64| {
            aggregate_weighted(&members.iter().map(|m| (f(m), m.population)).collect::<Vec<_>>())
        };
        Ok(RawCovariates {
            population: sum(|m| m.population),
            misuse_admissions: sum(|m| m.misuse_admissions),
            poisoning_admissions: sum(|m| m.poisoning_admissions),
            police_fte: sum(|m| m.police_fte),
            knife_crimes: sum(|m| m.knife_crimes),
            gdhi_per_head: weighted(|m| m.gdhi_per_head)?,
            beds_per_capita: weighted(|m| m.beds_per_capita)?,
        })
    }

    /// Model covariates in [`crate::domain::Covariate::ALL`] order.
    pub fn normalize(&self, adjust_misuse: bool, adjust_poisoning: bool) -> Result<[f64; 5], IngestError> {
        let rate = |count| per_capita_100k(count, self.population);
        let admissions = |count, adjust: bool| {
            if adjust {
                bed_adjust(rate(count), self.beds_per_capita)
            } else {
                Ok(rate(count))
            }
        };
        Ok([
            admissions(self.misuse_admissions, adjust_misuse)?,
            admissions(self.poisoning_admissions, adjust_poisoning)?,
            rate(self.police_fte),
            rate(self.knife_crimes),
            self.gdhi_per_head,
        ])
    }
}

/// A territory as read from disk, with its yearly raw statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTerritory {
    pub code: String,
    pub name: String,
    pub lon: f64,
    pub lat: f64,
    /// Population per year.
    pub populations: std::collections::BTreeMap<i32, f64>,
    pub covariates: std::collections::BTreeMap<i32, RawCovariates>,
}

/// Folds `b` into `a`. The merged territory keeps `a`'s code and name,
/// sums populations and additive counts, population-weights intensive
/// values and takes the representative point of the more populous member
/// in `reference_year`.
pub fn merge_origin(a: &RawTerritory, b: &RawTerritory, reference_year: i32) -> Result<RawTerritory, IngestError> {
    let pop = |t: &RawTerritory| t.populations.get(&reference_year).copied().unwrap_or(0.0);
    let point_from = if pop(b) > pop(a) { b } else { a };

    let mut populations = a.populations.clone();
    for (year, p) in &b.populations {
        *populations.entry(*year).or_insert(0.0) += p;
    }

    let mut covariates = std::collections::BTreeMap::new();
    for (year, ca) in &a.covariates {
        let merged = match b.covariates.get(year) {
            Some(cb) => RawCovariates::aggregate(&[*ca, *cb])?,
            None => *ca,
        };
        covariates.insert(*year, merged);
    }
    for (year, cb) in &b.covariates {
        covariates.entry(*year).or_insert(*cb);
    }

    Ok(RawTerritory {
        code: a.code.clone(),
        name: a.name.clone(),
        lon: point_from.lon,
        lat: point_from.lat,
        populations,
        covariates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    #[test]
    fn per_capita_examples() {
        assert_eq!(per_capita_100k(0.0, 1234.0), 0.0);
        assert_eq!(per_capita_100k(50.0, 2_000_000.0), 2.5);
        assert_eq!(per_capita_100k(777.0, 777.0), 100_000.0);
    }

    #[test]
    fn bed_adjust_examples() {
        assert_eq!(bed_adjust(12.5, 1.0).unwrap(), 12.5);
        assert_relative_eq!(bed_adjust(10.0, 0.004).unwrap(), 2500.0, epsilon = 1e-9);
        assert_eq!(bed_adjust(10.0, 0.008).unwrap() * 2.0, bed_adjust(10.0, 0.004).unwrap());
        assert!(matches!(bed_adjust(10.0, 0.0), Err(IngestError::ZeroBeds { .. })));
    }

    #[test]
    fn weighted_examples() {
        assert_eq!(aggregate_weighted(&[(4.2, 9.0)]).unwrap(), 4.2);
        assert_eq!(aggregate_weighted(&[(10.0, 1.0), (20.0, 3.0)]).unwrap(), 17.5);
        assert_relative_eq!(aggregate_weighted(&[(3.0, 1.0), (3.0, 7.0), (3.0, 0.5)]).unwrap(), 3.0, epsilon = 1e-15);
        assert_eq!(aggregate_weighted(&[]), Err(IngestError::EmptyGroup));
    }

    #[test]
    fn sum_examples() {
        assert_eq!(aggregate_sum(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(aggregate_sum(&[3.0, 4.0, 5.0]), 12.0);
    }

    proptest! {
        #[test]
        fn sum_is_permutation_invariant(mut counts in proptest::collection::vec(0u32..10_000, 0..20), seed in any::<u64>()) {
            let forward: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            let n = counts.len();
            if n > 1 {
                counts.rotate_left((seed as usize) % n);
            }
            let rotated: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            prop_assert_eq!(aggregate_sum(&forward), aggregate_sum(&rotated));
        }
    }

    fn raw(code: &str, pop: f64, counts: f64, lon: f64) -> RawTerritory {
        let cov = RawCovariates {
            population: pop,
            misuse_admissions: counts,
            poisoning_admissions: counts,
            police_fte: counts,
            knife_crimes: counts,
            gdhi_per_head: 20_000.0,
            beds_per_capita: 0.003,
        };
        RawTerritory {
            code: code.into(),
            name: code.into(),
            lon,
            lat: 51.5,
            populations: BTreeMap::from([(2019, pop)]),
            covariates: BTreeMap::from([(2019, cov)]),
        }
    }

    #[test]
    fn merging_empty_shell_is_identity() {
        let a = raw("MPS", 8_000_000.0, 80.0, -0.1);
        let shell = raw("COL", 0.0, 0.0, 5.0);
        let merged = merge_origin(&a, &shell, 2019).unwrap();
        assert_eq!(merged, a);
    }

    #[test]
    fn merged_rate_uses_merged_numerators() {
        let a = raw("MPS", 8_000_000.0, 80.0, -0.1);
        let b = raw("COL", 10_000.0, 1.0, -0.09);
        let merged = merge_origin(&b, &a, 2019).unwrap();
        assert_eq!(merged.populations[&2019], 8_010_000.0);
        assert_eq!(merged.lon, -0.1);
        assert_eq!(merged.code, "COL");
        let rates = merged.covariates[&2019].normalize(false, false).unwrap();
        assert_relative_eq!(rates[2], 81.0 / 8_010_000.0 * 1e5, epsilon = 1e-12);
        let mean_of_rates = (80.0 / 8e6 * 1e5 + 1.0 / 1e4 * 1e5) / 2.0;
        assert!((rates[2] - mean_of_rates).abs() > 1.0);
    }
}
