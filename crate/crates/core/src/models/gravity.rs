use crate::domain::{Family, TerritorySystem};

use super::{softmax_scaled, FlowPrediction, LogWeights, ModelError};

/// Outflow-constrained gravity model: destination `j` receives a share
/// proportional to `m_j^b / d_Lj^c`.
pub fn gravity_flows(
    b: f64,
    c: f64,
    system: &TerritorySystem,
    year: i32,
    total_outflow: f64,
) -> Result<FlowPrediction, ModelError> {
    let lw = log_weights(b, c, system)?;
    Ok(FlowPrediction { year, family: Family::Gravity, values: softmax_scaled(&lw.values, total_outflow, system)? })
}

pub(super) fn log_weights(b: f64, c: f64, system: &TerritorySystem) -> Result<LogWeights, ModelError> {
    let origin = system.origin_index;
    let mut values = Vec::with_capacity(system.destination_count());
    let mut jacobian = Vec::with_capacity(system.destination_count());
    for j in system.destinations() {
        let ln_mass = system.territories[j].population.ln();
        let ln_dist = system.costs.distance.get(origin, j).ln();
        let u = b * ln_mass - c * ln_dist;
        if !u.is_finite() {
            return Err(ModelError::NonFiniteWeight { destination: system.territories[j].code.clone() });
        }
        values.push(u);
        jacobian.push(vec![ln_mass, -ln_dist]);
    }
    Ok(LogWeights { values, jacobian })
}
