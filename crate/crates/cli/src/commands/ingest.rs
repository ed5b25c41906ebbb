use std::path::PathBuf;

use clap::Args;
use odflow::ingest::{ingest_sources, IngestConfig, IngestError, IngestPaths};

use crate::bundle::Bundle;
use crate::config::ConfigFile;
use crate::error::CliError;
use crate::manifest::{write_json, RunManifest};

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory holding territories.csv, covariates.csv, costs.csv,
    /// flows.csv and optionally mapping.csv.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub territories: Option<PathBuf>,
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    #[arg(long)]
    pub costs: Option<PathBuf>,
    #[arg(long)]
    pub flows: Option<PathBuf>,
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Code of the origin territory.
    #[arg(long)]
    pub origin: Option<String>,
    /// Territories to fold into the origin (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub merge: Option<Vec<String>>,
    /// Year whose populations are used by the models.
    #[arg(long)]
    pub population_year: Option<i32>,
    #[arg(long)]
    pub bed_adjust_misuse: Option<bool>,
    #[arg(long)]
    pub bed_adjust_poisoning: Option<bool>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bundle file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Report errors as one JSON object per line.
    #[arg(long)]
    pub json: bool,
    /// Record the wall-clock time in the manifest.
    #[arg(long)]
    pub stamp: bool,
}

const KEYS: &[&str] = &["origin", "merge", "population_year", "bed_adjust_misuse", "bed_adjust_poisoning"];

fn resolve_paths(args: &IngestArgs) -> Result<IngestPaths, CliError> {
    let base = args.data_dir.as_deref().map(IngestPaths::in_dir);
    let pick = |flag: &Option<PathBuf>, from_dir: Option<PathBuf>, name: &str| {
        flag.clone()
            .or(from_dir)
            .ok_or_else(|| CliError::Usage(format!("no path for {name}; use --{name} or --data-dir")))
    };
    Ok(IngestPaths {
        territories: pick(&args.territories, base.as_ref().map(|b| b.territories.clone()), "territories")?,
        covariates: pick(&args.covariates, base.as_ref().map(|b| b.covariates.clone()), "covariates")?,
        costs: pick(&args.costs, base.as_ref().map(|b| b.costs.clone()), "costs")?,
        flows: pick(&args.flows, base.as_ref().map(|b| b.flows.clone()), "flows")?,
        mapping: args.mapping.clone().or(base.and_then(|b| b.mapping)),
    })
}

fn resolve_config(args: &IngestArgs, file: &ConfigFile) -> Result<IngestConfig, CliError> {
    let origin = match &args.origin {
        Some(o) => o.clone(),
        None => {
            file.text("origin").map(str::to_string).ok_or_else(|| CliError::Usage("--origin is required".into()))?
        }
    };
    let merge = match &args.merge {
        Some(m) => m.clone(),
        None => file
            .text("merge")
            .map(|m| m.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
            .unwrap_or_default(),
    };
    Ok(IngestConfig {
        origin,
        merge,
        population_year: args.population_year.or(file.get("population_year")?),
        bed_adjust_misuse: args.bed_adjust_misuse.or(file.get("bed_adjust_misuse")?).unwrap_or(true),
        bed_adjust_poisoning: args.bed_adjust_poisoning.or(file.get("bed_adjust_poisoning")?).unwrap_or(true),
    })
}

fn report(errors: &[IngestError], json: bool) {
    for e in errors {
        if json {
            eprintln!("{}", serde_json::to_string(e).expect("error serializes"));
        } else {
            eprintln!("error: {e}");
        }
    }
}

pub fn run(args: &IngestArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(args.config.as_deref(), KEYS)?;
    let config = resolve_config(args, &file)?;
    let paths = resolve_paths(args)?;
    let sources = match paths.read() {
        Ok(s) => s,
        Err(errors) => {
            report(&errors, args.json);
            return Err(CliError::Validation);
        }
    };
    let output = match ingest_sources(&sources, &config) {
        Ok(o) => o,
        Err(errors) => {
            report(&errors, args.json);
            return Err(CliError::Validation);
        }
    };

    let options = serde_json::to_value(&config).expect("config serializes");
    let mut manifest = RunManifest::new("ingest", options, args.stamp);
    manifest.add_input("territories.csv", sources.territories.as_bytes());
    manifest.add_input("covariates.csv", sources.covariates.as_bytes());
    manifest.add_input("costs.csv", sources.costs.as_bytes());
    manifest.add_input("flows.csv", sources.flows.as_bytes());
    if let Some(m) = &sources.mapping {
        manifest.add_input("mapping.csv", m.as_bytes());
    }

    let bundle = Bundle {
        manifest,
        config,
        population_year: output.population_year,
        dataset: output.dataset,
        exclusions: output.exclusions,
    };
    write_json(&args.out, &bundle)?;
    let system = bundle.dataset.system();
    eprintln!(
        "ingested {} territories, years {:?}, {} excluded rows -> {}",
        system.len(),
        bundle.dataset.years(),
        bundle.exclusions.len(),
        args.out.display()
    );
    Ok(())
}
