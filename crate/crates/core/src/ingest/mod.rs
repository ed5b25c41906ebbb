//! Reading raw tables, normalizing covariates and assembling a validated
//! dataset.
//!
//! Year labels are fiscal: year `Y` covers April of `Y - 1` through March
//! of `Y` and is stored as the integer `Y`.
//!
//! Input files (UTF-8, header row, `.` decimals):
//!
//! * `territories.csv`: `code,name,lon,lat,population,year`, one row per
//!   territory and year.
//! * `covariates.csv`: `code,year,misuse_admissions,poisoning_admissions,
//!   police_fte,knife_crimes,gdhi_total,beds_per_capita`, raw counts and
//!   totals. `code` is either a territory code or a county listed in the
//!   mapping file; county rows also need a `population` column.
//! * `costs.csv`: `origin_code,dest_code,travel_time_min,distance_km` for
//!   every ordered pair of distinct territories.
//! * `flows.csv`: `year,dest_code,lines`.
//! * `mapping.csv` (optional): `county_code,police_code`.

mod table;
mod transform;

pub use transform::{
    aggregate_sum, aggregate_weighted, bed_adjust, merge_origin, per_capita_100k, RawCovariates, RawTerritory,
};

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    validate_system, CostMatrices, CovariateSet, FlowObservation, SquareMatrix, Territory, TerritorySystem,
    ValidatedDataset, ValidationError,
};
use table::Table;

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "kind")]
pub enum IngestError {
    #[error("{file}: {reason}")]
    Io { file: String, reason: String },
    #[error("{file}:{line}: column {column:?}: {reason}")]
    Parse { file: String, line: u64, column: String, reason: String },
    #[error("{file}: missing column {column:?}")]
    MissingColumn { file: String, column: String },
    #[error("{file}:{line}: duplicate entry for {code} in {year}")]
    DuplicateTerritory { file: String, line: u64, code: String, year: i32 },
    #[error("{file}:{line}: duplicate row for {key}")]
    DuplicateRow { file: String, line: u64, key: String },
    #[error("{file}:{line}: code {code} is neither a territory nor a mapped county")]
    UnmappedCounty { file: String, line: u64, code: String },
    #[error("{file}:{line}: unknown territory {code}")]
    UnknownTerritory { file: String, line: u64, code: String },
    #[error("territory {code} named in the configuration does not exist")]
    MissingTerritory { code: String },
    #[error("no population for {code} in {year}")]
    MissingPopulation { code: String, year: i32 },
    #[error("no covariates for {code} in {year}")]
    MissingCovariates { code: String, year: i32 },
    #[error("no cost entry from {origin} to {destination}")]
    MissingCost { origin: String, destination: String },
    #[error("no flow count for {code} in {year}")]
    MissingFlow { code: String, year: i32 },
    #[error("flows file contains no years")]
    NoFlows,
    #[error("beds per capita must be positive, found {beds_per_capita}")]
    ZeroBeds { beds_per_capita: f64 },
    #[error("aggregation group has no members with positive population")]
    EmptyGroup,
    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error(transparent)]
    Validation(ValidationError),
}

/// Ingest options. The origin keeps its code after merging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub origin: String,
    /// Territories folded into the origin.
    pub merge: Vec<String>,
    /// Year whose populations feed the models; defaults to the earliest
    /// flow year.
    pub population_year: Option<i32>,
    pub bed_adjust_misuse: bool,
    pub bed_adjust_poisoning: bool,
}

impl IngestConfig {
    pub fn new(origin: impl Into<String>) -> Self {
        IngestConfig {
            origin: origin.into(),
            merge: Vec::new(),
            population_year: None,
            bed_adjust_misuse: true,
            bed_adjust_poisoning: true,
        }
    }
}

/// Raw file contents with the labels used in error messages.
#[derive(Debug, Clone, Default)]
pub struct IngestSources {
    pub territories: String,
    pub covariates: String,
    pub costs: String,
    pub flows: String,
    pub mapping: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IngestPaths {
    pub territories: PathBuf,
    pub covariates: PathBuf,
    pub costs: PathBuf,
    pub flows: PathBuf,
    pub mapping: Option<PathBuf>,
}

impl IngestPaths {
    /// Standard file names inside `dir`; the mapping is used when present.
    pub fn in_dir(dir: &Path) -> Self {
        let mapping = dir.join("mapping.csv");
        IngestPaths {
            territories: dir.join("territories.csv"),
            covariates: dir.join("covariates.csv"),
            costs: dir.join("costs.csv"),
            flows: dir.join("flows.csv"),
            mapping: mapping.exists().then_some(mapping),
        }
    }

    pub fn read(&self) -> Result<IngestSources, Vec<IngestError>> {
        let read = |p: &Path| {
            std::fs::read_to_string(p)
                .map_err(|e| IngestError::Io { file: p.display().to_string(), reason: e.to_string() })
        };
        let mut errors = Vec::new();
        let mut take = |r: Result<String, IngestError>| r.map_err(|e| errors.push(e)).unwrap_or_default();
        let sources = IngestSources {
            territories: take(read(&self.territories)),
            covariates: take(read(&self.covariates)),
            costs: take(read(&self.costs)),
            flows: take(read(&self.flows)),
            mapping: self.mapping.as_deref().map(|p| take(read(p))),
        };
        if errors.is_empty() {
            Ok(sources)
        } else {
            Err(errors)
        }
    }
}

/// A row that was read but deliberately not used.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Exclusion {
    pub file: String,
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOutput {
    pub dataset: ValidatedDataset,
    pub population_year: i32,
    pub exclusions: Vec<Exclusion>,
}

pub fn load_dataset(paths: &IngestPaths, config: &IngestConfig) -> Result<IngestOutput, Vec<IngestError>> {
    ingest_sources(&paths.read()?, config)
}

const TERRITORIES: &str = "territories.csv";
const COVARIATES: &str = "covariates.csv";
const COSTS: &str = "costs.csv";
const FLOWS: &str = "flows.csv";
const MAPPING: &str = "mapping.csv";

struct TerritoryRow {
    line: u64,
    name: String,
    lon: f64,
    lat: f64,
    population: f64,
}

/// Assembles a dataset from in-memory file contents. The result depends
/// only on the row contents, not their order.
pub fn ingest_sources(sources: &IngestSources, config: &IngestConfig) -> Result<IngestOutput, Vec<IngestError>> {
    let mut errors = Vec::new();
    let mut exclusions = Vec::new();

    let territories =
        Table::parse(TERRITORIES, &sources.territories, &["code", "name", "lon", "lat", "population", "year"]);
    let covariates = Table::parse(
        COVARIATES,
        &sources.covariates,
        &[
            "code",
            "year",
            "misuse_admissions",
            "poisoning_admissions",
            "police_fte",
            "knife_crimes",
            "gdhi_total",
            "beds_per_capita",
        ],
    );
    let costs = Table::parse(COSTS, &sources.costs, &["origin_code", "dest_code", "travel_time_min", "distance_km"]);
    let flows = Table::parse(FLOWS, &sources.flows, &["year", "dest_code", "lines"]);
    let mapping = sources.mapping.as_deref().map(|m| Table::parse(MAPPING, m, &["county_code", "police_code"]));
    let (territories, covariates, costs, flows, mapping) =
        match (territories, covariates, costs, flows, mapping.transpose()) {
            (Ok(t), Ok(c), Ok(k), Ok(f), Ok(m)) => (t, c, k, f, m),
            (t, c, k, f, m) => {
                for r in [t.err(), c.err(), k.err(), f.err(), m.err()].into_iter().flatten() {
                    errors.extend(r);
                }
                return Err(errors);
            }
        };

    // Territory rows keyed by code and year.
    let mut rows: BTreeMap<String, BTreeMap<i32, TerritoryRow>> = BTreeMap::new();
    for (line, r) in &territories.rows {
        let parsed = (|| {
            Ok::<_, IngestError>((
                territories.text(*line, r, "code")?.to_string(),
                territories.year(*line, r, "year")?,
                TerritoryRow {
                    line: *line,
                    name: territories.text(*line, r, "name")?.to_string(),
                    lon: territories.real(*line, r, "lon")?,
                    lat: territories.real(*line, r, "lat")?,
                    population: territories.real(*line, r, "population")?,
                },
            ))
        })();
        match parsed {
            Ok((code, year, row)) => match rows.entry(code.clone()).or_default().entry(year) {
                std::collections::btree_map::Entry::Occupied(_) => {
                    errors.push(IngestError::DuplicateTerritory { file: TERRITORIES.into(), line: *line, code, year })
                }
                std::collections::btree_map::Entry::Vacant(slot) => {
                    slot.insert(row);
                }
            },
            Err(e) => errors.push(e),
        }
    }

    let mut county_to_police: BTreeMap<String, String> = BTreeMap::new();
    if let Some(mapping) = &mapping {
        for (line, r) in &mapping.rows {
            let (county, police) = match (mapping.text(*line, r, "county_code"), mapping.text(*line, r, "police_code"))
            {
                (Ok(c), Ok(p)) => (c.to_string(), p.to_string()),
                (a, b) => {
                    errors.extend([a.err(), b.err()].into_iter().flatten());
                    continue;
                }
            };
            if !rows.contains_key(&police) {
                errors.push(IngestError::UnknownTerritory { file: MAPPING.into(), line: *line, code: police });
            } else if let std::collections::btree_map::Entry::Vacant(slot) = county_to_police.entry(county.clone()) {
                slot.insert(police);
            } else {
                errors.push(IngestError::DuplicateRow { file: MAPPING.into(), line: *line, key: county });
            }
        }
    }

    // Flow years decide which covariate years are needed.
    let mut flow_rows: BTreeMap<(i32, String), (u64, u64)> = BTreeMap::new();
    for (line, r) in &flows.rows {
        let parsed = (|| {
            Ok::<_, IngestError>((
                flows.year(*line, r, "year")?,
                flows.text(*line, r, "dest_code")?.to_string(),
                flows.count(*line, r, "lines")?,
            ))
        })();
        match parsed {
            Ok((year, code, lines)) => {
                if flow_rows.contains_key(&(year, code.clone())) {
                    errors.push(IngestError::DuplicateRow {
                        file: FLOWS.into(),
                        line: *line,
                        key: format!("{code} {year}"),
                    });
                } else {
                    flow_rows.insert((year, code), (*line, lines));
                }
            }
            Err(e) => errors.push(e),
        }
    }
    let years: BTreeSet<i32> = flow_rows.keys().map(|(y, _)| *y).collect();
    let Some(&first_year) = years.first() else {
        errors.push(IngestError::NoFlows);
        return Err(errors);
    };
    let population_year = config.population_year.unwrap_or(first_year);

    for (code, by_year) in &rows {
        for (year, row) in by_year {
            if *year != population_year && !years.contains(year) {
                exclusions.push(Exclusion {
                    file: TERRITORIES.into(),
                    line: row.line,
                    reason: format!("{code} {year}: year not used"),
                });
            }
        }
    }

    // Covariate rows grouped by territory and year.
    struct Member {
        county: Option<String>,
        line: u64,
        raw: RawCovariates,
    }
    let mut groups: BTreeMap<(String, i32), Vec<Member>> = BTreeMap::new();
    let mut seen: BTreeSet<(String, i32)> = BTreeSet::new();
    let has_population = covariates.has_column("population");
    for (line, r) in &covariates.rows {
        let line = *line;
        let head = (covariates.text(line, r, "code"), covariates.year(line, r, "year"));
        let (code, year) = match head {
            (Ok(c), Ok(y)) => (c.to_string(), y),
            (a, b) => {
                errors.extend([a.err(), b.err()].into_iter().flatten());
                continue;
            }
        };
        if !years.contains(&year) {
            exclusions.push(Exclusion {
                file: COVARIATES.into(),
                line,
                reason: format!("{code} {year}: no flows for year"),
            });
            continue;
        }
        if !seen.insert((code.clone(), year)) {
            errors.push(IngestError::DuplicateTerritory { file: COVARIATES.into(), line, code, year });
            continue;
        }
        let (territory, county) = if rows.contains_key(&code) {
            (code.clone(), None)
        } else if let Some(police) = county_to_police.get(&code) {
            (police.clone(), Some(code.clone()))
        } else {
            errors.push(IngestError::UnmappedCounty { file: COVARIATES.into(), line, code });
            continue;
        };
        let parsed = (|| {
            let population = match &county {
                Some(_) if !has_population => {
                    return Err(IngestError::MissingColumn { file: COVARIATES.into(), column: "population".into() })
                }
                Some(_) => covariates.real(line, r, "population")?,
                None => match rows[&territory].get(&year) {
                    Some(row) => row.population,
                    None => return Err(IngestError::MissingPopulation { code: territory.clone(), year }),
                },
            };
            let gdhi_total = covariates.real(line, r, "gdhi_total")?;
            Ok::<_, IngestError>(RawCovariates {
                population,
                misuse_admissions: covariates.real(line, r, "misuse_admissions")?,
                poisoning_admissions: covariates.real(line, r, "poisoning_admissions")?,
                police_fte: covariates.real(line, r, "police_fte")?,
                knife_crimes: covariates.real(line, r, "knife_crimes")?,
                gdhi_per_head: gdhi_total / population,
                beds_per_capita: covariates.real(line, r, "beds_per_capita")?,
            })
        })();
        match parsed {
            Ok(raw) => groups.entry((territory, year)).or_default().push(Member { county, line, raw }),
            Err(e) => errors.push(e),
        }
    }

    let mut raw_territories: BTreeMap<String, RawTerritory> = BTreeMap::new();
    for (code, by_year) in &rows {
        let Some(reference) = by_year.get(&population_year).or_else(|| by_year.values().next()) else {
            continue;
        };
        raw_territories.insert(
            code.clone(),
            RawTerritory {
                code: code.clone(),
                name: reference.name.clone(),
                lon: reference.lon,
                lat: reference.lat,
                populations: by_year.iter().map(|(y, r)| (*y, r.population)).collect(),
                covariates: BTreeMap::new(),
            },
        );
    }
    for ((territory, year), mut members) in groups {
        if members.len() > 1 && members.iter().any(|m| m.county.is_none()) {
            let line = members.iter().map(|m| m.line).max().unwrap_or(0);
            errors.push(IngestError::DuplicateTerritory { file: COVARIATES.into(), line, code: territory, year });
            continue;
        }
        members.sort_by(|a, b| a.county.cmp(&b.county));
        let raws: Vec<RawCovariates> = members.iter().map(|m| m.raw).collect();
        let aggregated = match RawCovariates::aggregate(&raws) {
            Ok(a) => a,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        let Some(population) = rows[&territory].get(&year).map(|r| r.population) else {
            errors.push(IngestError::MissingPopulation { code: territory, year });
            continue;
        };
        let t = raw_territories.get_mut(&territory).expect("territory rows exist");
        t.covariates.insert(year, RawCovariates { population, ..aggregated });
    }

    // Fold the merged territories into the origin.
    let origin = config.origin.clone();
    let mut cost_source = origin.clone();
    let mut merged_away: BTreeSet<String> = BTreeSet::new();
    if !raw_territories.contains_key(&origin) {
        errors.push(IngestError::MissingTerritory { code: origin.clone() });
    } else {
        for member in &config.merge {
            if *member == origin || merged_away.contains(member) {
                errors.push(IngestError::InvalidConfig { reason: format!("{member} merged more than once") });
                continue;
            }
            let Some(b) = raw_territories.get(member).cloned() else {
                errors.push(IngestError::MissingTerritory { code: member.clone() });
                continue;
            };
            let a = &raw_territories[&origin];
            let pop = |t: &RawTerritory| t.populations.get(&population_year).copied().unwrap_or(0.0);
            if pop(&b) > pop(a) {
                cost_source = member.clone();
            }
            match merge_origin(a, &b, population_year) {
                Ok(m) => {
                    raw_territories.insert(origin.clone(), m);
                    raw_territories.remove(member);
                    merged_away.insert(member.clone());
                }
                Err(e) => errors.push(e),
            }
        }
    }

    let codes: Vec<String> = raw_territories.keys().cloned().collect();
    let index: BTreeMap<&str, usize> = codes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let n = codes.len();
    let merged_into = |code: &str| -> Option<&str> {
        if code == origin || merged_away.contains(code) {
            Some(origin.as_str())
        } else {
            None
        }
    };

    let mut territory_list = Vec::with_capacity(n);
    for code in &codes {
        let t = &raw_territories[code];
        match t.populations.get(&population_year) {
            Some(&population) => territory_list.push(Territory {
                code: code.clone(),
                name: t.name.clone(),
                population,
                lon: t.lon,
                lat: t.lat,
            }),
            None => errors.push(IngestError::MissingPopulation { code: code.clone(), year: population_year }),
        }
    }

    let mut covariate_sets = BTreeMap::new();
    for &year in &years {
        let mut values = Vec::with_capacity(n);
        for code in &codes {
            match raw_territories[code].covariates.get(&year) {
                Some(raw) => match raw.normalize(config.bed_adjust_misuse, config.bed_adjust_poisoning) {
                    Ok(v) => values.push(v),
                    Err(e) => errors.push(e),
                },
                None => errors.push(IngestError::MissingCovariates { code: code.clone(), year }),
            }
        }
        covariate_sets.insert(year, CovariateSet { year, values });
    }

    let mut travel = SquareMatrix::zeros(n);
    let mut distance = SquareMatrix::zeros(n);
    let mut filled = vec![false; n * n];
    for (line, r) in &costs.rows {
        let line = *line;
        let parsed = (|| {
            Ok::<_, IngestError>((
                costs.text(line, r, "origin_code")?.to_string(),
                costs.text(line, r, "dest_code")?.to_string(),
                costs.real(line, r, "travel_time_min")?,
                costs.real(line, r, "distance_km")?,
            ))
        })();
        let (from, to, time, km) = match parsed {
            Ok(p) => p,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        let mut resolve = |code: &str| -> Option<Option<usize>> {
            if let Some(target) = merged_into(code) {
                if code != cost_source {
                    return Some(None);
                }
                return Some(Some(index[target]));
            }
            match index.get(code) {
                Some(&i) => Some(Some(i)),
                None => {
                    errors.push(IngestError::UnknownTerritory { file: COSTS.into(), line, code: code.to_string() });
                    None
                }
            }
        };
        let (Some(i), Some(j)) = (resolve(&from), resolve(&to)) else {
            continue;
        };
        let (Some(i), Some(j)) = (i, j) else {
            exclusions.push(Exclusion {
                file: COSTS.into(),
                line,
                reason: format!("{from}->{to}: merged member, costs taken from {cost_source}"),
            });
            continue;
        };
        if i == j {
            exclusions.push(Exclusion { file: COSTS.into(), line, reason: format!("{from}->{to}: same territory") });
            continue;
        }
        if filled[i * n + j] {
            errors.push(IngestError::DuplicateRow { file: COSTS.into(), line, key: format!("{from}->{to}") });
            continue;
        }
        filled[i * n + j] = true;
        travel.set(i, j, time);
        distance.set(i, j, km);
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && !filled[i * n + j] {
                errors.push(IngestError::MissingCost { origin: codes[i].clone(), destination: codes[j].clone() });
            }
        }
    }

    let origin_index = index.get(origin.as_str()).copied().unwrap_or(0);
    let destinations: Vec<usize> = (0..n).filter(|&i| i != origin_index).collect();
    let mut observations = Vec::new();
    let mut counts: BTreeMap<i32, Vec<Option<f64>>> =
        years.iter().map(|&y| (y, vec![None; destinations.len()])).collect();
    for ((year, code), (line, lines)) in &flow_rows {
        if merged_into(code).is_some() {
            exclusions.push(Exclusion {
                file: FLOWS.into(),
                line: *line,
                reason: format!("{code} {year}: flow within the origin"),
            });
            continue;
        }
        match index.get(code.as_str()) {
            Some(&i) => {
                let slot = destinations.iter().position(|&d| d == i).expect("non-origin index");
                counts.get_mut(year).expect("year collected")[slot] = Some(*lines as f64);
            }
            None => errors.push(IngestError::UnknownTerritory { file: FLOWS.into(), line: *line, code: code.clone() }),
        }
    }
    for (year, slots) in counts {
        let mut values = Vec::with_capacity(slots.len());
        for (k, v) in slots.into_iter().enumerate() {
            match v {
                Some(v) => values.push(v),
                None => errors.push(IngestError::MissingFlow { code: codes[destinations[k]].clone(), year }),
            }
        }
        observations.push(FlowObservation::new(year, values));
    }

    if !errors.is_empty() {
        return Err(errors);
    }

    let system = TerritorySystem {
        territories: territory_list,
        covariates: covariate_sets,
        costs: CostMatrices { travel_time: travel, distance },
        origin_index,
    };
    let dataset = validate_system(&system, &observations)
        .map_err(|es| es.into_iter().map(IngestError::Validation).collect::<Vec<_>>())?;
    exclusions.sort();
    Ok(IngestOutput { dataset, population_year, exclusions })
}
