use std::path::Path;

use odflow::domain::{validate_system, ValidatedDataset};
use odflow::ingest::{Exclusion, IngestConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::manifest::RunManifest;

/// The self-contained dataset written by `ingest`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub manifest: RunManifest,
    pub config: IngestConfig,
    pub population_year: i32,
    pub dataset: ValidatedDataset,
    pub exclusions: Vec<Exclusion>,
}

/// Reads a bundle and re-checks the dataset invariants. Returns the raw
/// bytes too, for manifest digests.
pub fn read_bundle(path: &Path) -> Result<(Bundle, Vec<u8>), CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let bundle: Bundle = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Usage(format!("{}: not a dataset bundle: {e}", path.display())))?;
    if let Err(errors) = validate_system(bundle.dataset.system(), bundle.dataset.flows()) {
        let first = errors.first().map(ToString::to_string).unwrap_or_default();
        return Err(CliError::Usage(format!("{}: invalid dataset: {first}", path.display())));
    }
    Ok((bundle, bytes))
}
