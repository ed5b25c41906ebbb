use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvaluationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankKey {
    Bic,
    SMean,
    LogMse,
}

impl RankKey {
    fn value(self, report: &EvaluationReport) -> Option<f64> {
        match self {
            RankKey::Bic => report.bic,
            RankKey::SMean => Some(report.s_mean),
            RankKey::LogMse => report.log_mse.map(|l| l.value),
        }
        .filter(|v| !v.is_nan())
    }

    fn descending(self) -> bool {
        matches!(self, RankKey::SMean)
    }
}

impl FromStr for RankKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bic" => Ok(RankKey::Bic),
            "s_mean" => Ok(RankKey::SMean),
            "log_mse" => Ok(RankKey::LogMse),
            other => Err(format!("unknown rank key `{other}` (expected bic, s_mean or log_mse)")),
        }
    }
}

impl fmt::Display for RankKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankKey::Bic => "bic",
            RankKey::SMean => "s_mean",
            RankKey::LogMse => "log_mse",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTable {
    pub key: RankKey,
    pub entries: Vec<EvaluationReport>,
}

/// Orders reports by `key` (ascending for BIC and log-MSE, descending for
/// mean Sørensen-Dice), breaking ties by fewer parameters and then spec id.
/// Reports without a value for the key go last. Ranks start at 1.
pub fn rank_models(mut reports: Vec<EvaluationReport>, key: RankKey) -> RankingTable {
    reports.sort_by(|a, b| {
        let primary = match (key.value(a), key.value(b)) {
            (Some(x), Some(y)) => {
                if key.descending() {
                    y.total_cmp(&x)
                } else {
                    x.total_cmp(&y)
                }
            }
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        primary.then(a.spec.param_count().cmp(&b.spec.param_count())).then(a.spec.spec_id.cmp(&b.spec.spec_id))
    });
    for (i, r) in reports.iter_mut().enumerate() {
        r.rank = Some(i + 1);
    }
    RankingTable { key, entries: reports }
}
