//! Core data types: territories, covariates, cost matrices, flow observations
//! and the model configurations that are fitted against them.
//!
//! Everything here is plain data. A [`TerritorySystem`] plus its
//! [`FlowObservation`]s only become usable by the models after passing
//! [`validate_system`], which reports every violated invariant at once.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The five social covariates that can enter the retail model exponent.
///
/// Declaration order fixes the alpha index: `Misuse` is alpha_1 through `Gdhi`
/// which is alpha_5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    /// Hospital admissions by misuse of drugs, per 100k, bed-adjusted.
    Misuse,
    /// Hospital admissions by poisoning of drugs, per 100k, bed-adjusted.
    Poisoning,
    /// Full-time police officers per 100k.
    Police,
    /// Knife crime events per 100k.
    Knife,
    /// Gross disposable household income per head.
    Gdhi,
}

impl Covariate {
    pub const ALL: [Covariate; 5] =
        [Covariate::Misuse, Covariate::Poisoning, Covariate::Police, Covariate::Knife, Covariate::Gdhi];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Covariate> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Covariate::Misuse => "misuse",
            Covariate::Poisoning => "poisoning",
            Covariate::Police => "police",
            Covariate::Knife => "knife",
            Covariate::Gdhi => "gdhi",
        }
    }

    /// Name of the retail exponent attached to this covariate.
    pub fn alpha_name(self) -> &'static str {
        match self {
            Covariate::Misuse => "alpha_misuse",
            Covariate::Poisoning => "alpha_poisoning",
            Covariate::Police => "alpha_police",
            Covariate::Knife => "alpha_knife",
            Covariate::Gdhi => "alpha_gdhi",
        }
    }

    pub fn from_name(name: &str) -> Option<Covariate> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for Covariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which covariates are switched on in a retail model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CovariateMask(pub [bool; 5]);

impl CovariateMask {
    pub const NONE: CovariateMask = CovariateMask([false; 5]);

    pub fn from_covariates(covariates: &[Covariate]) -> Self {
        let mut mask = [false; 5];
        for c in covariates {
            mask[c.index()] = true;
        }
        CovariateMask(mask)
    }

    pub fn contains(&self, covariate: Covariate) -> bool {
        self.0[covariate.index()]
    }

    /// Included covariates in alpha-index order.
    pub fn covariates(&self) -> Vec<Covariate> {
        Covariate::ALL.into_iter().filter(|c| self.contains(*c)).collect()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Parses the `+`-joined form produced by `Display` (`none` for empty).
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if text.is_empty() || text == "none" {
            return Some(Self::NONE);
        }
        let mut covs = Vec::new();
        for part in text.split('+') {
            covs.push(Covariate::from_name(part.trim())?);
        }
        Some(Self::from_covariates(&covs))
    }
}

impl fmt::Display for CovariateMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.covariates().iter().map(|c| c.name()).collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join("+"))
        }
    }
}

/// One spatial unit. The representative point is the most populous place
/// inside the territory, in decimal degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Territory {
    pub code: String,
    pub name: String,
    pub population: f64,
    pub lon: f64,
    pub lat: f64,
}

/// Normalized covariate values for one year, one row per territory in
/// system order. Row layout follows [`Covariate::ALL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSet {
    pub year: i32,
    pub values: Vec<[f64; 5]>,
}

impl CovariateSet {
    pub fn value(&self, territory: usize, covariate: Covariate) -> f64 {
        self.values[territory][covariate.index()]
    }
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Option<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(SquareMatrix { n, data: rows.into_iter().flatten().collect() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    fn is_consistent(&self) -> bool {
        self.data.len() == self.n * self.n
    }
}

/// Travel times in minutes and distances in kilometres between
/// representative points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrices {
    pub travel_time: SquareMatrix,
    pub distance: SquareMatrix,
}

/// The spatial universe: territories in lexicographic code order, yearly
/// covariates, cost matrices and the designated origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerritorySystem {
    pub territories: Vec<Territory>,
    pub covariates: BTreeMap<i32, CovariateSet>,
    pub costs: CostMatrices,
    pub origin_index: usize,
}

impl TerritorySystem {
    pub fn len(&self) -> usize {
        self.territories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.territories.is_empty()
    }

    pub fn origin(&self) -> &Territory {
        &self.territories[self.origin_index]
    }

    /// Indices of every territory except the origin, in system order.
    pub fn destinations(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| i != self.origin_index).collect()
    }

    pub fn destination_count(&self) -> usize {
        self.len().saturating_sub(1)
    }

    pub fn destination_codes(&self) -> Vec<&str> {
        self.destinations().into_iter().map(|i| self.territories[i].code.as_str()).collect()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.territories.iter().map(|t| t.population).collect()
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.territories.iter().position(|t| t.code == code)
    }

    pub fn covariates_for(&self, year: i32) -> Option<&CovariateSet> {
        self.covariates.get(&year)
    }
}

/// Observed line counts from the origin to each destination, in the order of
/// [`TerritorySystem::destinations`].
///
/// Counts are stored as reals so that noiseless synthetic pseudo-counts can
/// share the type; ingested counts are always whole numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowObservation {
    pub year: i32,
    pub counts: Vec<f64>,
}

impl FlowObservation {
    pub fn new(year: i32, counts: Vec<f64>) -> Self {
        FlowObservation { year, counts }
    }

    pub fn total_outflow(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    Gravity,
    Radiation,
    Retail,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gravity => "Gravity",
            Family::Radiation => "Radiation",
            Family::Retail => "Retail",
        }
    }

    pub fn parse(text: &str) -> Option<Family> {
        match text.trim().to_ascii_lowercase().as_str() {
            "gravity" => Some(Family::Gravity),
            "radiation" => Some(Family::Radiation),
            "retail" => Some(Family::Retail),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Loss {
    /// Mean-square loss from a Gaussian likelihood ("MSE" in tables).
    Gaussian,
    Poisson,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::Gaussian => "MSE",
            Loss::Poisson => "Poisson",
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One of the 68 enumerated model configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub spec_id: u32,
    pub family: Family,
    pub loss: Loss,
    pub mask: CovariateMask,
}

impl ModelSpec {
    pub fn gravity(spec_id: u32, loss: Loss) -> Self {
        ModelSpec { spec_id, family: Family::Gravity, loss, mask: CovariateMask::NONE }
    }

    pub fn radiation(spec_id: u32, loss: Loss) -> Self {
        ModelSpec { spec_id, family: Family::Radiation, loss, mask: CovariateMask::NONE }
    }

    pub fn retail(spec_id: u32, loss: Loss, mask: CovariateMask) -> Self {
        ModelSpec { spec_id, family: Family::Retail, loss, mask }
    }

    /// Number of free parameters in the fitted vector.
    pub fn param_count(&self) -> usize {
        match self.family {
            Family::Gravity | Family::Radiation => 2,
            Family::Retail => 1 + self.mask.count(),
        }
    }

    pub fn param_names(&self) -> Vec<&'static str> {
        match self.family {
            Family::Gravity => vec!["b", "c"],
            Family::Radiation => vec!["rho", "r"],
            Family::Retail => {
                let mut names = vec!["beta"];
                names.extend(self.mask.covariates().iter().map(|c| c.alpha_name()));
                names
            }
        }
    }
}

/// Fitted or generating parameters of one model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ParameterVector {
    /// Destination-mass exponent `b` and distance-decay exponent `c`.
    Gravity { b: f64, c: f64 },
    /// Opportunity density `rho` and absorption exponent `r`, both positive.
    Radiation { rho: f64, r: f64 },
    /// Travel-time decay `beta` and one exponent per included covariate.
    Retail { beta: f64, alphas: Vec<(Covariate, f64)> },
}

impl ParameterVector {
    pub fn family(&self) -> Family {
        match self {
            ParameterVector::Gravity { .. } => Family::Gravity,
            ParameterVector::Radiation { .. } => Family::Radiation,
            ParameterVector::Retail { .. } => Family::Retail,
        }
    }

    /// Flat values in the order of [`ModelSpec::param_names`].
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            ParameterVector::Gravity { b, c } => vec![*b, *c],
            ParameterVector::Radiation { rho, r } => vec![*rho, *r],
            ParameterVector::Retail { beta, alphas } => {
                let mut sorted = alphas.clone();
                sorted.sort_by_key(|(c, _)| *c);
                std::iter::once(*beta).chain(sorted.into_iter().map(|(_, a)| a)).collect()
            }
        }
    }

    /// Rebuilds a parameter vector from flat values laid out for `spec`.
    pub fn from_slice(spec: &ModelSpec, values: &[f64]) -> Option<Self> {
        if values.len() != spec.param_count() {
            return None;
        }
        Some(match spec.family {
            Family::Gravity => ParameterVector::Gravity { b: values[0], c: values[1] },
            Family::Radiation => ParameterVector::Radiation { rho: values[0], r: values[1] },
            Family::Retail => ParameterVector::Retail {
                beta: values[0],
                alphas: spec.mask.covariates().into_iter().zip(values[1..].iter().copied()).collect(),
            },
        })
    }

    pub fn mask(&self) -> CovariateMask {
        match self {
            ParameterVector::Retail { alphas, .. } => {
                let covs: Vec<Covariate> = alphas.iter().map(|(c, _)| *c).collect();
                CovariateMask::from_covariates(&covs)
            }
            _ => CovariateMask::NONE,
        }
    }

    pub fn alpha(&self, covariate: Covariate) -> Option<f64> {
        match self {
            ParameterVector::Retail { alphas, .. } => alphas.iter().find(|(c, _)| *c == covariate).map(|(_, a)| *a),
            _ => None,
        }
    }
}

/// Every structural problem [`validate_system`] can report.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
pub enum ValidationError {
    #[error("covariate {covariate} of territory {territory} in year {year} is not strictly positive ({value})")]
    NonPositiveCovariate { territory: String, covariate: Covariate, year: i32, value: f64 },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: String, expected: usize, found: usize },
    #[error("flow year {year} has no covariates")]
    UnknownYear { year: i32 },
    #[error("negative or non-finite count {value} for destination {destination} in year {year}")]
    NegativeCount { year: i32, destination: String, value: f64 },
    #[error("territory {territory} has non-positive population {population}")]
    NonPositivePopulation { territory: String, population: f64 },
    #[error("territory codes are not unique and sorted at {code}")]
    UnorderedCode { code: String },
    #[error("origin index {index} out of range for {len} territories")]
    InvalidOrigin { index: usize, len: usize },
    #[error("invalid {matrix} entry ({from}, {to}) = {value}")]
    InvalidCost { matrix: &'static str, from: String, to: String, value: f64 },
    #[error("flow year {year} appears more than once")]
    DuplicateYear { year: i32 },
}

/// A territory system together with flow observations that satisfy every
/// invariant. Only obtainable through [`validate_system`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedDataset {
    system: TerritorySystem,
    flows: Vec<FlowObservation>,
}

impl ValidatedDataset {
    pub fn system(&self) -> &TerritorySystem {
        &self.system
    }

    pub fn flows(&self) -> &[FlowObservation] {
        &self.flows
    }

    pub fn flow_for(&self, year: i32) -> Option<&FlowObservation> {
        self.flows.iter().find(|f| f.year == year)
    }

    pub fn years(&self) -> Vec<i32> {
        self.flows.iter().map(|f| f.year).collect()
    }

    pub fn into_parts(self) -> (TerritorySystem, Vec<FlowObservation>) {
        (self.system, self.flows)
    }
}

/// Checks every invariant of the system and its flows, returning all
/// violations rather than stopping at the first.
pub fn validate_system(
    system: &TerritorySystem,
    flows: &[FlowObservation],
) -> Result<ValidatedDataset, Vec<ValidationError>> {
    let mut errors = Vec::new();
    let n = system.len();

    if system.origin_index >= n {
        errors.push(ValidationError::InvalidOrigin { index: system.origin_index, len: n });
    }

    for (i, t) in system.territories.iter().enumerate() {
        if !(t.population > 0.0 && t.population.is_finite()) {
            errors.push(ValidationError::NonPositivePopulation { territory: t.code.clone(), population: t.population });
        }
        if i > 0 && system.territories[i - 1].code >= t.code {
            errors.push(ValidationError::UnorderedCode { code: t.code.clone() });
        }
    }

    for set in system.covariates.values() {
        if set.values.len() != n {
            errors.push(ValidationError::DimensionMismatch {
                what: format!("covariates for {}", set.year),
                expected: n,
                found: set.values.len(),
            });
            continue;
        }
        for (t, row) in system.territories.iter().zip(&set.values) {
            for cov in Covariate::ALL {
                let value = row[cov.index()];
                if !(value > 0.0 && value.is_finite()) {
                    errors.push(ValidationError::NonPositiveCovariate {
                        territory: t.code.clone(),
                        covariate: cov,
                        year: set.year,
                        value,
                    });
                }
            }
        }
    }

    for (name, matrix) in [("travel_time", &system.costs.travel_time), ("distance", &system.costs.distance)] {
        if !matrix.is_consistent() || matrix.dim() != n {
            errors.push(ValidationError::DimensionMismatch {
                what: format!("{name} matrix"),
                expected: n,
                found: matrix.dim(),
            });
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                let v = matrix.get(i, j);
                let ok = if i == j { v == 0.0 } else { v > 0.0 && v.is_finite() };
                if !ok {
                    errors.push(ValidationError::InvalidCost {
                        matrix: name,
                        from: system.territories[i].code.clone(),
                        to: system.territories[j].code.clone(),
                        value: v,
                    });
                }
            }
        }
    }

    let destinations = system.destinations();
    let mut seen_years = BTreeSet::new();
    for flow in flows {
        if !seen_years.insert(flow.year) {
            errors.push(ValidationError::DuplicateYear { year: flow.year });
        }
        if !system.covariates.contains_key(&flow.year) {
            errors.push(ValidationError::UnknownYear { year: flow.year });
        }
        if flow.counts.len() != destinations.len() {
            errors.push(ValidationError::DimensionMismatch {
                what: format!("flows for {}", flow.year),
                expected: destinations.len(),
                found: flow.counts.len(),
            });
            continue;
        }
        for (&dest, &value) in destinations.iter().zip(&flow.counts) {
            if !(value >= 0.0 && value.is_finite()) {
                errors.push(ValidationError::NegativeCount {
                    year: flow.year,
                    destination: system.territories[dest].code.clone(),
                    value,
                });
            }
        }
    }

    if errors.is_empty() {
        Ok(ValidatedDataset { system: system.clone(), flows: flows.to_vec() })
    } else {
        Err(errors)
    }
}
