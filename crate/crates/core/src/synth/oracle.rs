use serde::{Deserialize, Serialize};

use crate::calibrate::loss::loss_value;
use crate::calibrate::LossValue;
use crate::domain::{Family, FlowObservation, ModelSpec, ParameterVector, TerritorySystem};
use crate::models::{self, FlowPrediction};

/// Radiation flows by direct nested loops: for every destination, scan all
/// territories for intervening population, then evaluate the absorption
/// probability in closed form and normalize.
pub fn brute_force_radiation(system: &TerritorySystem, rho: f64, r: f64, total_outflow: f64) -> FlowPrediction {
    let o = system.origin_index;
    let d = &system.costs.distance;
    let n_o = rho * system.territories[o].population;

    let mut probabilities = Vec::new();
    for j in 0..system.territories.len() {
        if j == o {
            continue;
        }
        let radius = d.get(o, j);
        let mut between = 0.0;
        for k in 0..system.territories.len() {
            if k != o && k != j && d.get(o, k) < radius {
                between += system.territories[k].population;
            }
        }
        let n_j = rho * system.territories[j].population;
        let n_between = rho * between;
        let near = (n_o + n_between).powf(r);
        let far = (n_o + n_j + n_between).powf(r);
        probabilities.push((n_o.powf(r) + 1.0) * (far - near) / ((1.0 + near) * (1.0 + far)));
    }

    let sum: f64 = probabilities.iter().sum();
    FlowPrediction {
        year: 0,
        family: Family::Radiation,
        values: probabilities.iter().map(|p| total_outflow * p / sum).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub point: Vec<f64>,
    pub loss: LossValue,
}

/// Exhaustive search over the Cartesian product of `axes`, one axis per
/// parameter in [`ModelSpec::param_names`] order. Points are visited in
/// lexicographic order and only a strictly smaller loss replaces the
/// incumbent, so ties go to the lexicographically first point. Points where
/// the model or loss is undefined are skipped.
pub fn grid_search(
    spec: &ModelSpec,
    system: &TerritorySystem,
    observation: &FlowObservation,
    axes: &[Vec<f64>],
    lambda: f64,
) -> Option<GridResult> {
    if axes.len() != spec.param_count() || axes.iter().any(Vec::is_empty) {
        return None;
    }
    let mut best: Option<GridResult> = None;
    let mut cursor = vec![0usize; axes.len()];
    loop {
        let point: Vec<f64> = cursor.iter().zip(axes).map(|(&i, axis)| axis[i]).collect();
        if let Some(loss) = evaluate(spec, system, observation, &point, lambda) {
            if best.as_ref().is_none_or(|b| loss.total < b.loss.total) {
                best = Some(GridResult { point, loss });
            }
        }
        let mut k = axes.len();
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            cursor[k] += 1;
            if cursor[k] < axes[k].len() {
                break;
            }
            cursor[k] = 0;
        }
    }
}

fn evaluate(
    spec: &ModelSpec,
    system: &TerritorySystem,
    observation: &FlowObservation,
    point: &[f64],
    lambda: f64,
) -> Option<LossValue> {
    let params = ParameterVector::from_slice(spec, point)?;
    let prediction = models::predict(&params, system, observation.year, observation.total_outflow()).ok()?;
    let loss = loss_value(spec.loss, &prediction, observation, point, lambda).ok()?;
    loss.total.is_finite().then_some(loss)
}
