use std::io;
use std::path::Path;

use crate::domain::{Covariate, FlowObservation, TerritorySystem};

/// Writes `system` and integer-valued `flows` as the five ingest CSV files
/// in `dir`. Raw counts are chosen so that ingest (with bed adjustment on
/// and one bed per capita) reproduces the covariates.
pub fn write_csv_dataset(system: &TerritorySystem, flows: &[FlowObservation], dir: &Path) -> io::Result<()> {
    if let Some(bad) = flows.iter().flat_map(|f| &f.counts).find(|c| c.fract() != 0.0 || **c < 0.0) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("flow count {bad} is not a nonnegative integer"),
        ));
    }
    std::fs::create_dir_all(dir)?;
    let years: Vec<i32> = system.covariates.keys().copied().collect();

    let mut w = csv::Writer::from_path(dir.join("territories.csv"))?;
    w.write_record(["code", "name", "lon", "lat", "population", "year"])?;
    for t in &system.territories {
        for year in &years {
            w.write_record([
                &t.code,
                &t.name,
                &t.lon.to_string(),
                &t.lat.to_string(),
                &t.population.to_string(),
                &year.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("covariates.csv"))?;
    w.write_record([
        "code",
        "year",
        "misuse_admissions",
        "poisoning_admissions",
        "police_fte",
        "knife_crimes",
        "gdhi_total",
        "beds_per_capita",
    ])?;
    for (year, set) in &system.covariates {
        for (t, row) in system.territories.iter().zip(&set.values) {
            let count = |c: Covariate| (row[c.index()] * t.population / 100_000.0).to_string();
            w.write_record([
                t.code.clone(),
                year.to_string(),
                count(Covariate::Misuse),
                count(Covariate::Poisoning),
                count(Covariate::Police),
                count(Covariate::Knife),
                (row[Covariate::Gdhi.index()] * t.population).to_string(),
                "1".to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("costs.csv"))?;
    w.write_record(["origin_code", "dest_code", "travel_time_min", "distance_km"])?;
    for (i, a) in system.territories.iter().enumerate() {
        for (j, b) in system.territories.iter().enumerate() {
            if i != j {
                w.write_record([
                    &a.code,
                    &b.code,
                    &system.costs.travel_time.get(i, j).to_string(),
                    &system.costs.distance.get(i, j).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("flows.csv"))?;
    w.write_record(["year", "dest_code", "lines"])?;
    let destinations = system.destinations();
    for flow in flows {
        for (&d, count) in destinations.iter().zip(&flow.counts) {
            w.write_record([flow.year.to_string(), system.territories[d].code.clone(), (*count as u64).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{generate_flows, generate_system, GroundTruth, Noise, SynthConfig};
    use super::*;
    use crate::domain::Family;
    use crate::ingest::{load_dataset, IngestConfig, IngestPaths};

    #[test]
    fn round_trips_through_ingest() {
        let system = generate_system(&SynthConfig::new(7, 21));
        let params = GroundTruth::default().params(Family::Radiation);
        let flows: Vec<FlowObservation> = [2019, 2020]
            .iter()
            .map(|&y| generate_flows(&params, &system, y, 300.0, Noise::Poisson, y as u64).unwrap())
            .collect();
        let dir = tempfile::tempdir().unwrap();
        write_csv_dataset(&system, &flows, dir.path()).unwrap();
        let out = load_dataset(&IngestPaths::in_dir(dir.path()), &IngestConfig::new("T00")).unwrap();
        let loaded = out.dataset.system();
        assert_eq!(loaded.territories, system.territories);
        assert_eq!(loaded.costs, system.costs);
        assert_eq!(out.dataset.flows(), &flows[..]);
        for (year, set) in &system.covariates {
            for (a, b) in loaded.covariates[year].values.iter().flatten().zip(set.values.iter().flatten()) {
                assert!((a - b).abs() <= 1e-12 * b.abs(), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_fractional_counts() {
        let system = generate_system(&SynthConfig::new(3, 1));
        let flows = [FlowObservation::new(2019, vec![0.5, 1.0])];
        let dir = tempfile::tempdir().unwrap();
        assert!(write_csv_dataset(&system, &flows, dir.path()).is_err());
    }
}
