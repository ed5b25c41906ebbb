use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use odflow::calibrate::CalibrateOptions;
use odflow::domain::{Covariate, ModelSpec, ParameterVector};
use odflow::pipeline::{evaluate_specs, Execution};
use odflow::select::{enumerate_models, rank_models, EvaluationReport, RankKey};
use serde::Serialize;

use crate::bundle::read_bundle;
use crate::config::ConfigFile;
use crate::error::{io_error, CliError};
use crate::format::{optional, real};
use crate::manifest::{write_json, RunManifest};

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Dataset bundle written by `ingest`.
    #[arg(long)]
    pub bundle: PathBuf,
    /// `all`, or spec ids and ranges such as `1,2,5-36`.
    #[arg(long)]
    pub specs: Option<String>,
    /// Training year whose fit supplies the reported parameters, BIC and
    /// log-MSE. Defaults to the earlier year.
    #[arg(long)]
    pub train_year: Option<i32>,
    /// L2 penalty weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Ranking key: log_mse, bic or s_mean.
    #[arg(long)]
    pub rank_by: Option<String>,
    /// Worker threads; 0 uses every core. Defaults to ODFLOW_JOBS.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Exit 0 even when some specs fail.
    #[arg(long)]
    pub keep_going: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub stamp: bool,
}

const KEYS: &[&str] = &["specs", "train_year", "lambda", "rank_by", "jobs", "keep_going"];

#[derive(Debug, Serialize)]
struct RunOptions {
    specs: Vec<u32>,
    train_year: i32,
    lambda: f64,
    rank_by: String,
    keep_going: bool,
}

pub fn parse_specs(text: &str) -> Result<Vec<u32>, CliError> {
    let all = enumerate_models().len() as u32;
    if text.trim() == "all" {
        return Ok((1..=all).collect());
    }
    let mut ids = std::collections::BTreeSet::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || CliError::Usage(format!("invalid spec selection {part:?}"));
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (a.trim().parse::<u32>().map_err(|_| bad())?, b.trim().parse::<u32>().map_err(|_| bad())?),
            None => {
                let id = part.parse::<u32>().map_err(|_| bad())?;
                (id, id)
            }
        };
        if lo == 0 || hi > all || lo > hi {
            return Err(CliError::Usage(format!("spec ids must lie in 1..={all}, got {part:?}")));
        }
        ids.extend(lo..=hi);
    }
    if ids.is_empty() {
        return Err(CliError::Usage("no specs selected".into()));
    }
    Ok(ids.into_iter().collect())
}

fn header(years: &[i32]) -> Vec<String> {
    let mut h: Vec<String> = ["spec_id", "family", "loss", "mask", "train_year", "b", "c", "rho", "r", "beta"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(Covariate::ALL.iter().map(|c| c.alpha_name().to_string()));
    h.extend(["se_b", "se_c", "se_rho", "se_r", "se_beta"].iter().map(|s| s.to_string()));
    h.extend(Covariate::ALL.iter().map(|c| format!("se_{}", c.alpha_name())));
    h.extend(years.iter().map(|y| format!("S_{y}")));
    h.extend(["S_mean", "BIC", "BIC_textbook", "log_MSE", "rank", "status"].iter().map(|s| s.to_string()));
    h
}

/// Parameter and standard-error cells in header order.
fn parameter_cells(params: &ParameterVector, std_errors: &[Option<f64>]) -> (Vec<String>, Vec<String>) {
    let mut values: BTreeMap<&str, (f64, Option<f64>)> = BTreeMap::new();
    let flat = params.to_vec();
    let names: Vec<&str> = match params {
        ParameterVector::Gravity { .. } => vec!["b", "c"],
        ParameterVector::Radiation { .. } => vec!["rho", "r"],
        ParameterVector::Retail { alphas, .. } => {
            std::iter::once("beta").chain(alphas.iter().map(|(c, _)| c.alpha_name())).collect()
        }
    };
    for (i, name) in names.iter().enumerate() {
        values.insert(name, (flat[i], std_errors.get(i).copied().flatten()));
    }
    let order: Vec<&str> =
        ["b", "c", "rho", "r", "beta"].into_iter().chain(Covariate::ALL.iter().map(|c| c.alpha_name())).collect();
    let p = order.iter().map(|n| values.get(n).map(|v| real(v.0)).unwrap_or_default()).collect();
    let s = order.iter().map(|n| optional(values.get(n).and_then(|v| v.1))).collect();
    (p, s)
}

fn spec_cells(spec: &ModelSpec) -> Vec<String> {
    vec![spec.spec_id.to_string(), spec.family.name().into(), spec.loss.name().into(), spec.mask.to_string()]
}

#[derive(Serialize)]
#[serde(untagged)]
enum Artifact<'a> {
    Report(&'a EvaluationReport),
    Failure { spec: &'a ModelSpec, error: String },
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(args.config.as_deref(), KEYS)?;
    let (bundle, bundle_bytes) = read_bundle(&args.bundle)?;
    let dataset = &bundle.dataset;
    let years = dataset.years();
    if years.len() != 2 {
        return Err(CliError::Usage(format!("cross-validation needs two flow years, bundle has {years:?}")));
    }

    let specs_text = args.specs.clone().or_else(|| file.text("specs").map(str::to_string)).unwrap_or("all".into());
    let spec_ids = parse_specs(&specs_text)?;
    let train_year = args.train_year.or(file.get("train_year")?).unwrap_or(years[0]);
    if !years.contains(&train_year) {
        return Err(CliError::Usage(format!("train year {train_year} not in bundle years {years:?}")));
    }
    let lambda = args.lambda.or(file.get("lambda")?).unwrap_or(odflow::calibrate::DEFAULT_LAMBDA);
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(CliError::Usage(format!("lambda must be a nonnegative number, got {lambda}")));
    }
    let rank_text =
        args.rank_by.clone().or_else(|| file.text("rank_by").map(str::to_string)).unwrap_or("log_mse".into());
    let rank_key: RankKey =
        rank_text.parse().map_err(|_| CliError::Usage(format!("unknown rank key {rank_text:?}")))?;
    let execution = match args.jobs.or(file.get("jobs")?) {
        Some(jobs) => Execution::with_jobs(jobs),
        None => Execution::from_env(),
    };
    let keep_going = args.keep_going || file.get("keep_going")?.unwrap_or(false);

    let catalogue = enumerate_models();
    let specs: Vec<ModelSpec> = spec_ids.iter().map(|&id| catalogue[id as usize - 1]).collect();
    let options = CalibrateOptions::default().with_lambda(lambda);
    let outcomes = evaluate_specs(&specs, dataset.system(), dataset.flows(), &options, Some(train_year), execution);

    let successes: Vec<EvaluationReport> = outcomes.iter().filter_map(|o| o.as_ref().ok().cloned()).collect();
    let ranks: BTreeMap<u32, usize> = if successes.is_empty() {
        BTreeMap::new()
    } else {
        rank_models(successes, rank_key).entries.iter().map(|r| (r.spec.spec_id, r.rank.unwrap_or(0))).collect()
    };

    std::fs::create_dir_all(args.out.join("specs")).map_err(|e| io_error(&args.out, e))?;
    let results_path = args.out.join("results.csv");
    let mut writer = csv::Writer::from_path(&results_path).map_err(|e| io_error(&results_path, e))?;
    writer.write_record(header(&years)).map_err(|e| io_error(&results_path, e))?;
    let mut failures = Vec::new();
    for (spec, outcome) in specs.iter().zip(&outcomes) {
        let mut row = spec_cells(spec);
        row.push(train_year.to_string());
        let artifact = match outcome {
            Ok(report) => {
                let fold = report.reference_fold();
                let (p, s) = parameter_cells(&fold.calibration.params, &fold.calibration.std_errors);
                row.extend(p);
                row.extend(s);
                row.extend(years.iter().map(|&y| optional(report.s_for_year(y))));
                row.push(real(report.s_mean));
                row.push(optional(report.bic));
                row.push(optional(report.bic_textbook));
                row.push(optional(report.log_mse.map(|m| m.value)));
                row.push(ranks.get(&spec.spec_id).map(ToString::to_string).unwrap_or_default());
                let converged = report.folds.iter().all(|f| f.calibration.converged);
                row.push(if converged { "ok" } else { "not_converged" }.into());
                Artifact::Report(report)
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 20 + years.len() + 5));
                row.push("failed".into());
                eprintln!("spec {}: {e}", spec.spec_id);
                failures.push(format!("spec {}: {e}", spec.spec_id));
                Artifact::Failure { spec, error: e.to_string() }
            }
        };
        writer.write_record(&row).map_err(|e| io_error(&results_path, e))?;
        write_json(&spec_path(&args.out, spec.spec_id), &artifact)?;
    }
    writer.flush().map_err(|e| io_error(&results_path, e))?;

    let run_options = RunOptions { specs: spec_ids, train_year, lambda, rank_by: rank_key.to_string(), keep_going };
    let mut manifest =
        RunManifest::new("run", serde_json::to_value(&run_options).expect("options serialize"), args.stamp);
    manifest.add_input("bundle", &bundle_bytes);
    write_json(&args.out.join("manifest.json"), &manifest)?;

    eprintln!("{} specs evaluated, {} failed -> {}", specs.len(), failures.len(), results_path.display());
    if !failures.is_empty() && !keep_going {
        return Err(CliError::Calibration(failures.join("; ")));
    }
    Ok(())
}

pub fn spec_path(out: &Path, spec_id: u32) -> PathBuf {
    out.join("specs").join(format!("spec_{spec_id:02}.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_selection() {
        assert_eq!(parse_specs("all").unwrap().len(), 68);
        assert_eq!(parse_specs("9").unwrap(), vec![9]);
        assert_eq!(parse_specs("3, 1-2,2").unwrap(), vec![1, 2, 3]);
        assert!(parse_specs("0").is_err());
        assert!(parse_specs("69").is_err());
        assert!(parse_specs("x").is_err());
    }

    #[test]
    fn header_layout() {
        let h = header(&[2019, 2020]);
        assert_eq!(h.len(), 5 + 10 + 10 + 2 + 6);
        assert_eq!(h[5..10], ["b", "c", "rho", "r", "beta"]);
        assert_eq!(h[13], "alpha_knife");
        assert_eq!(h[h.len() - 8..h.len() - 6], ["S_2019", "S_2020"]);
    }
}
