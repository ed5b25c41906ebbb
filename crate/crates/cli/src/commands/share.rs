use std::path::PathBuf;

use clap::Args;
use odflow::select::{concentration_share, SelectError};

use crate::bundle::read_bundle;
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct ShareArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Territory codes, separated by newlines or commas; `#` starts a comment.
    #[arg(long)]
    pub subset_file: PathBuf,
}

pub fn parse_subset(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(','))
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(str::to_string)
        .collect()
}

/// Prints `<year> <percent>` per flow year, percent with two decimals.
pub fn run(args: &ShareArgs) -> Result<(), CliError> {
    let (bundle, _) = read_bundle(&args.bundle)?;
    let text = std::fs::read_to_string(&args.subset_file)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.subset_file.display())))?;
    let codes = parse_subset(&text);
    let subset: Vec<&str> = codes.iter().map(String::as_str).collect();
    for observation in bundle.dataset.flows() {
        match concentration_share(bundle.dataset.system(), observation, &subset) {
            Ok(share) => println!("{} {:.2}", observation.year, share * 100.0),
            Err(e @ (SelectError::UnknownCode { .. } | SelectError::EmptyObservation)) => {
                eprintln!("error: {e}");
                return Err(CliError::Validation);
            }
            Err(e) => return Err(CliError::Usage(e.to_string())),
        }
    }
    Ok(())
}
