use std::path::PathBuf;

use clap::Args;
use odflow::domain::{Family, FlowObservation};
use odflow::synth::{generate_flows, generate_system, write_csv_dataset, Noise, SynthConfig};
use serde_json::json;

use crate::error::{io_error, CliError};
use crate::manifest::write_json;

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    pub territories: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Family generating the flows: gravity, radiation or retail.
    #[arg(long, default_value = "retail")]
    pub family: String,
    /// Expected outflow per year.
    #[arg(long, default_value_t = 4000.0)]
    pub total: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [2019, 2020])]
    pub years: Vec<i32>,
    /// Directory for the CSV files and truth.json.
    #[arg(long)]
    pub out: PathBuf,
}

/// Writes a synthetic dataset in the ingest formats. Flows are Poisson
/// draws; the origin is the first territory code.
pub fn run(args: &SynthArgs) -> Result<(), CliError> {
    if args.territories < 2 {
        return Err(CliError::Usage("--territories must be at least 2".into()));
    }
    if !(args.total > 0.0 && args.total.is_finite()) {
        return Err(CliError::Usage("--total must be positive".into()));
    }
    let family =
        Family::parse(&args.family).ok_or_else(|| CliError::Usage(format!("unknown family {:?}", args.family)))?;
    let mut config = SynthConfig::new(args.territories, args.seed);
    config.years = args.years.clone();
    let system = generate_system(&config);
    let params = config.truth.params(family);
    let flows: Vec<FlowObservation> = args
        .years
        .iter()
        .map(|&year| generate_flows(&params, &system, year, args.total, Noise::Poisson, args.seed ^ year as u64))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    write_csv_dataset(&system, &flows, &args.out).map_err(|e| io_error(&args.out, e))?;
    let truth = json!({
        "origin": system.origin().code,
        "family": family.name(),
        "params": params,
        "total": args.total,
        "config": config,
    });
    write_json(&args.out.join("truth.json"), &truth)?;
    eprintln!("wrote {} territories, years {:?} -> {}", args.territories, args.years, args.out.display());
    Ok(())
}
