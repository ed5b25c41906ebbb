use std::path::PathBuf;

use clap::Args;
use odflow::models;
use odflow::select::EvaluationReport;
use serde_json::{json, Value};

use crate::bundle::read_bundle;
use crate::error::{io_error, CliError};
use crate::format::real;
use crate::manifest::{write_json, RunManifest};

use super::run::spec_path;

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Dataset bundle the results were computed from.
    #[arg(long)]
    pub bundle: PathBuf,
    /// Output directory of `run`.
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub spec: u32,
    /// Year to predict and compare; its observed outflow constrains the model.
    #[arg(long)]
    pub year: i32,
    /// Feature collection to write.
    #[arg(long)]
    pub geojson: Option<PathBuf>,
    /// Feature collection of territory boundaries with a `code` property.
    #[arg(long)]
    pub boundaries: Option<PathBuf>,
    /// CSV of observed and modelled flows, largest observed first.
    #[arg(long)]
    pub dispersion: Option<PathBuf>,
    #[arg(long)]
    pub stamp: bool,
}

struct Row {
    code: String,
    name: String,
    observed: f64,
    modelled: f64,
}

pub fn run(args: &ExportArgs) -> Result<(), CliError> {
    if args.geojson.is_none() && args.dispersion.is_none() {
        return Err(CliError::Usage("nothing to export; give --geojson and/or --dispersion".into()));
    }
    if args.geojson.is_some() && args.boundaries.is_none() {
        return Err(CliError::Usage("MissingBoundaries: --geojson needs --boundaries".into()));
    }
    let (bundle, bundle_bytes) = read_bundle(&args.bundle)?;
    let report_path = spec_path(&args.results, args.spec);
    let report_bytes = std::fs::read(&report_path).map_err(|_| {
        CliError::Usage(format!("UnknownSpec: no results for spec {} in {}", args.spec, args.results.display()))
    })?;
    let report: EvaluationReport = serde_json::from_slice(&report_bytes)
        .map_err(|_| CliError::Usage(format!("UnknownSpec: spec {} has no successful calibration", args.spec)))?;

    let system = bundle.dataset.system();
    let observation = bundle
        .dataset
        .flow_for(args.year)
        .ok_or_else(|| CliError::Usage(format!("year {} not in bundle", args.year)))?;
    let params = &report.reference_fold().calibration.params;
    let prediction = models::predict(params, system, args.year, observation.total_outflow())
        .map_err(|e| CliError::Calibration(e.to_string()))?;
    let rows: Vec<Row> = system
        .destinations()
        .iter()
        .zip(observation.counts.iter().zip(&prediction.values))
        .map(|(&d, (&observed, &modelled))| Row {
            code: system.territories[d].code.clone(),
            name: system.territories[d].name.clone(),
            observed,
            modelled,
        })
        .collect();

    let options = json!({ "spec": args.spec, "year": args.year, "reference_year": report.reference_year });
    let mut manifest = RunManifest::new("export", options, args.stamp);
    manifest.add_input("bundle", &bundle_bytes);
    manifest.add_input(&format!("spec_{:02}.json", args.spec), &report_bytes);

    if let (Some(out), Some(boundaries)) = (&args.geojson, &args.boundaries) {
        let text = std::fs::read_to_string(boundaries)
            .map_err(|e| CliError::Usage(format!("MissingBoundaries: {}: {e}", boundaries.display())))?;
        let collection: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: not JSON: {e}", boundaries.display())))?;
        let features = collection["features"]
            .as_array()
            .ok_or_else(|| CliError::Usage(format!("{}: not a feature collection", boundaries.display())))?;
        let mut out_features = Vec::with_capacity(rows.len());
        for row in &rows {
            let feature = features
                .iter()
                .find(|f| f["properties"]["code"].as_str() == Some(row.code.as_str()))
                .ok_or_else(|| CliError::Usage(format!("MissingBoundaries: no boundary for {}", row.code)))?;
            out_features.push(json!({
                "type": "Feature",
                "geometry": feature["geometry"],
                "properties": {
                    "code": row.code,
                    "name": row.name,
                    "observed": row.observed,
                    "modelled": row.modelled,
                    "diff": row.modelled - row.observed,
                    "excluded_from_logmse": row.observed == 0.0,
                },
            }));
        }
        let mut geo_manifest = manifest.clone();
        geo_manifest.add_file(boundaries)?;
        write_json(out, &json!({ "type": "FeatureCollection", "features": out_features }))?;
        geo_manifest.write_beside(out)?;
    }

    if let Some(out) = &args.dispersion {
        let mut sorted: Vec<&Row> = rows.iter().collect();
        sorted.sort_by(|a, b| b.observed.total_cmp(&a.observed).then_with(|| a.code.cmp(&b.code)));
        let mut w = csv::Writer::from_path(out).map_err(|e| io_error(out, e))?;
        w.write_record(["code", "observed", "modelled"]).map_err(|e| io_error(out, e))?;
        for r in sorted {
            w.write_record([r.code.clone(), real(r.observed), real(r.modelled)]).map_err(|e| io_error(out, e))?;
        }
        w.flush().map_err(|e| io_error(out, e))?;
        manifest.write_beside(out)?;
    }
    Ok(())
}
